//! Lattice geometries and pairwise coupling matrices.
//!
//! Sites are labelled `0..L`; square lattices are stored in row-major order.
//! Boundaries are open and 2D distances are Euclidean on the unit grid.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Chain { len: usize },
    Square { lx: usize, ly: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSpec {
    geometry: Geometry,
}

impl LatticeSpec {
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn site_count(&self) -> usize {
        match self.geometry {
            Geometry::Chain { len } => len,
            Geometry::Square { lx, ly } => lx * ly,
        }
    }

    /// Integer grid coordinates `(x, y)`; chains have `y = 0`.
    pub fn coordinates(&self, site: usize) -> (usize, usize) {
        match self.geometry {
            Geometry::Chain { .. } => (site, 0),
            Geometry::Square { lx, .. } => (site % lx, site / lx),
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (xi, yi) = self.coordinates(i);
        let (xj, yj) = self.coordinates(j);
        let dx = xi.abs_diff(xj) as f64;
        let dy = yi.abs_diff(yj) as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// Nearest neighbours on the lattice graph (open boundaries).
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        let (xi, yi) = self.coordinates(i);
        let (xj, yj) = self.coordinates(j);
        xi.abs_diff(xj) + yi.abs_diff(yj) == 1
    }
}

pub fn build_lattice(geometry: Geometry) -> Result<LatticeSpec> {
    match geometry {
        Geometry::Chain { len: 0 } => Err(Error::Lattice("chain length must be positive".into())),
        Geometry::Square { lx, ly } if lx == 0 || ly == 0 => Err(Error::Lattice(format!(
            "square extents must be positive, got {lx}x{ly}"
        ))),
        _ => Ok(LatticeSpec { geometry }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingMode {
    PowerLaw,
    NearestNeighbor,
    DisorderedPowerLaw,
}

impl fmt::Display for CouplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingMode::PowerLaw => "powerlaw",
            CouplingMode::NearestNeighbor => "nearest_neighbor",
            CouplingMode::DisorderedPowerLaw => "disordered_powerlaw",
        })
    }
}

impl FromStr for CouplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "powerlaw" => Ok(CouplingMode::PowerLaw),
            "nearest_neighbor" => Ok(CouplingMode::NearestNeighbor),
            "disordered_powerlaw" => Ok(CouplingMode::DisorderedPowerLaw),
            other => Err(Error::Couplings(format!("unknown coupling mode `{other}`"))),
        }
    }
}

/// Symmetric per-axis couplings `J^β_ij`, β ∈ {x, y, z}, with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    sites: usize,
    axes: [Vec<f64>; 3],
    alpha: f64,
    mode: CouplingMode,
    seed: Option<u64>,
}

impl CouplingMatrix {
    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> CouplingMode {
        self.mode
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `J^axis_ij` with `axis` 0, 1, 2 for x, y, z.
    #[inline]
    pub fn get(&self, axis: usize, i: usize, j: usize) -> f64 {
        self.axes[axis][i * self.sites + j]
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.axes[axis]
    }

    /// True when only the z couplings are nonzero.
    pub fn is_ising(&self) -> bool {
        self.axes[0].iter().chain(self.axes[1].iter()).all(|&v| v == 0.0)
    }

    /// Short hex digest of the coupling values, used to tag output files.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.sites as u64).to_le_bytes());
        for axis in &self.axes {
            for v in axis {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn from_fn(
        lattice: &LatticeSpec,
        alpha: f64,
        mode: CouplingMode,
        seed: Option<u64>,
        mut value: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let n = lattice.site_count();
        let mut axes = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
        for i in 0..n {
            for j in (i + 1)..n {
                for (axis, m) in axes.iter_mut().enumerate() {
                    let v = value(axis, i, j);
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
        }
        CouplingMatrix {
            sites: n,
            axes,
            alpha,
            mode,
            seed,
        }
    }

    /// Disordered Ising couplings `J^z_ij = u_ij / r_ij^alpha` from explicit
    /// amplitudes, given as an `L x L` row-major matrix (upper triangle read).
    pub fn from_amplitudes(lattice: &LatticeSpec, alpha: f64, amplitudes: &[f64]) -> Result<Self> {
        let n = lattice.site_count();
        if amplitudes.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: amplitudes.len(),
            });
        }
        check_alpha(alpha)?;
        Ok(Self::from_fn(
            lattice,
            alpha,
            CouplingMode::DisorderedPowerLaw,
            None,
            |axis, i, j| {
                if axis == 2 {
                    amplitudes[i * n + j] / lattice.distance(i, j).powf(alpha)
                } else {
                    0.0
                }
            },
        ))
    }

    /// Writes the plain-text matrix format: one header line
    /// `L alpha mode seed`, then `L` rows for each of the x, y, z axes.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".to_string());
        writeln!(out, "{} {:e} {} {}", self.sites, self.alpha, self.mode, seed)?;
        for axis in &self.axes {
            for row in axis.chunks(self.sites) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty coupling file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!("bad coupling header `{header}`")));
        }
        let sites: usize = fields[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad site count `{}`", fields[0])))?;
        let alpha: f64 = fields[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad alpha `{}`", fields[1])))?;
        let mode: CouplingMode = fields[2].parse()?;
        let seed = match fields[3] {
            "none" => None,
            s => Some(s.parse().map_err(|_| Error::Format(format!("bad seed `{s}`")))?),
        };
        let mut axes = [
            Vec::with_capacity(sites * sites),
            Vec::with_capacity(sites * sites),
            Vec::with_capacity(sites * sites),
        ];
        for axis in axes.iter_mut() {
            for _ in 0..sites {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Format("truncated coupling file".into()))??;
                let before = axis.len();
                for tok in line.split_whitespace() {
                    axis.push(
                        tok.parse::<f64>()
                            .map_err(|_| Error::Format(format!("bad value `{tok}`")))?,
                    );
                }
                if axis.len() - before != sites {
                    return Err(Error::Format(format!(
                        "row has {} entries, expected {sites}",
                        axis.len() - before
                    )));
                }
            }
        }
        let m = CouplingMatrix {
            sites,
            axes,
            alpha,
            mode,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let n = self.sites;
        for (a, axis) in self.axes.iter().enumerate() {
            for i in 0..n {
                if axis[i * n + i] != 0.0 {
                    return Err(Error::Couplings(format!("nonzero diagonal on axis {a}")));
                }
                for j in (i + 1)..n {
                    if axis[i * n + j] != axis[j * n + i] {
                        return Err(Error::Couplings(format!("asymmetric entry ({i},{j}) on axis {a}")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Couplings(format!(
            "decay exponent must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(())
}

/// Clean couplings `J^β_ij = J_β / r_ij^alpha` (power law) or `J_β` on
/// lattice bonds only (nearest neighbour).
pub fn build_couplings(lattice: &LatticeSpec, alpha: f64, j: [f64; 3], mode: CouplingMode) -> Result<CouplingMatrix> {
    check_alpha(alpha)?;
    match mode {
        CouplingMode::PowerLaw => Ok(CouplingMatrix::from_fn(lattice, alpha, mode, None, |axis, a, b| {
            j[axis] / lattice.distance(a, b).powf(alpha)
        })),
        CouplingMode::NearestNeighbor => Ok(CouplingMatrix::from_fn(lattice, alpha, mode, None, |axis, a, b| {
            if lattice.adjacent(a, b) {
                j[axis]
            } else {
                0.0
            }
        })),
        CouplingMode::DisorderedPowerLaw => Err(Error::Couplings(
            "disordered couplings are drawn with sample_disorder".into(),
        )),
    }
}

/// Draws `u_ij` uniformly on `[-1, 1]` for every unordered pair (in row-major
/// upper-triangle order) and returns `J^z_ij = u_ij / r_ij^alpha`.
pub fn sample_disorder(lattice: &LatticeSpec, alpha: f64, seed: u64) -> Result<CouplingMatrix> {
    check_alpha(alpha)?;
    let n = lattice.site_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amplitudes = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random_range(-1.0..=1.0);
            amplitudes[i * n + j] = u;
            amplitudes[j * n + i] = u;
        }
    }
    let mut m = CouplingMatrix::from_amplitudes(lattice, alpha, &amplitudes)?;
    m.seed = Some(seed);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> LatticeSpec {
        build_lattice(Geometry::Chain { len: n }).unwrap()
    }

    #[test]
    fn chain_and_square_geometry() {
        let c = chain(32);
        assert_eq!(c.site_count(), 32);
        assert_eq!(c.distance(0, 3), 3.0);
        assert_eq!(chain(128).site_count(), 128);

        let sq = build_lattice(Geometry::Square { lx: 4, ly: 4 }).unwrap();
        assert_eq!(sq.site_count(), 16);
        assert_eq!(sq.distance(0, 5), 2f64.sqrt());
        assert!(sq.adjacent(0, 4));
        assert!(!sq.adjacent(3, 4));
    }

    #[test]
    fn rejects_empty_extents() {
        assert!(build_lattice(Geometry::Chain { len: 0 }).is_err());
        assert!(build_lattice(Geometry::Square { lx: 3, ly: 0 }).is_err());
    }

    #[test]
    fn power_law_values() {
        let c = chain(3);
        let m = build_couplings(&c, 0.0, [0.0, 0.0, 1.0], CouplingMode::PowerLaw).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(2, i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
        let m = build_couplings(&c, 3.0, [0.0, 0.0, 1.0], CouplingMode::PowerLaw).unwrap();
        assert_eq!(m.get(2, 0, 2), 0.125);
        let m = build_couplings(&chain(5), 6.0, [0.5, 1.0, 0.25], CouplingMode::PowerLaw).unwrap();
        assert_eq!(m.get(1, 1, 3), 1.0 / 64.0);
        assert_eq!(m.get(0, 1, 3), 0.5 / 64.0);
        assert!(build_couplings(&c, -1.0, [1.0; 3], CouplingMode::PowerLaw).is_err());
    }

    #[test]
    fn nearest_neighbor_values() {
        let m = build_couplings(&chain(3), 0.0, [0.0, 0.0, 1.0], CouplingMode::NearestNeighbor).unwrap();
        assert_eq!(m.get(2, 0, 1), 1.0);
        assert_eq!(m.get(2, 0, 2), 0.0);
    }

    #[test]
    fn disorder_amplitude_times_decay() {
        let c = chain(3);
        let mut u = vec![0.0; 9];
        u[2] = 0.5;
        u[6] = 0.5;
        let m = CouplingMatrix::from_amplitudes(&c, 3.0, &u).unwrap();
        assert_eq!(m.get(2, 0, 2), 0.0625);
        assert_eq!(m.get(2, 2, 0), 0.0625);
        assert!(m.is_ising());
    }

    #[test]
    fn disorder_is_bounded_and_reproducible() {
        let c = chain(12);
        let a = sample_disorder(&c, 0.0, 42).unwrap();
        let b = sample_disorder(&c, 0.0, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_disorder(&c, 0.0, 43).unwrap());
        assert!(a.axis(2).iter().all(|v| v.abs() <= 1.0));
        assert_eq!(a.seed(), Some(42));
    }

    #[test]
    fn disorder_mean_is_centered() {
        // u ~ U[-1,1] has sigma = 1/sqrt(3).
        let c = chain(150);
        let m = sample_disorder(&c, 0.0, 7).unwrap();
        let n = c.site_count();
        let draws: Vec<f64> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m.get(2, i, j))
            .collect();
        let count = draws.len() as f64;
        assert!(count >= 1e4);
        let mean = draws.iter().sum::<f64>() / count;
        assert!(mean.abs() <= 4.0 / count.sqrt() / 3f64.sqrt());
    }

    #[test]
    fn text_format_round_trip() {
        let c = build_lattice(Geometry::Square { lx: 2, ly: 3 }).unwrap();
        let m = sample_disorder(&c, 3.0, 11).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = CouplingMatrix::read_text(&buf[..]).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.fingerprint(), back.fingerprint());
        assert!(CouplingMatrix::read_text(&b"2 0 powerlaw none\n0 1\n"[..]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_for_every_mode(seed in any::<u64>(), alpha in 0.0f64..6.0, n in 2usize..9) {
                let c = chain(n);
                let mats = [
                    build_couplings(&c, alpha, [0.5, 1.0, 0.25], CouplingMode::PowerLaw).unwrap(),
                    build_couplings(&c, alpha, [0.5, 1.0, 0.25], CouplingMode::NearestNeighbor).unwrap(),
                    sample_disorder(&c, alpha, seed).unwrap(),
                ];
                for m in &mats {
                    for a in 0..3 {
                        for i in 0..n {
                            prop_assert_eq!(m.get(a, i, i), 0.0);
                            for j in 0..n {
                                prop_assert_eq!(m.get(a, i, j), m.get(a, j, i));
                            }
                        }
                    }
                }
            }
        }
    }
}
