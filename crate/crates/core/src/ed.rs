//! Exact state-vector propagation for small lattices, with reduced density
//! matrices and entanglement entropy.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{CompiledOperator, TermList};

/// Default largest lattice the dense backend accepts (65 536 amplitudes).
pub const DEFAULT_MAX_SITES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    sites: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(sites: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 1usize << sites {
            return Err(Error::Dimension {
                expected: 1 << sites,
                got: amplitudes.len(),
            });
        }
        Ok(StateVector { sites, amplitudes })
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `⟨σ^x_i⟩`.
    pub fn one_point_x(&self, i: usize) -> f64 {
        let bit = 1usize << i;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(x, a)| (self.amplitudes[x ^ bit].conj() * a).re)
            .sum()
    }

    /// `⟨σ^x_i σ^x_j⟩`.
    pub fn two_point_x(&self, i: usize, j: usize) -> f64 {
        let mask = (1usize << i) ^ (1usize << j);
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(x, a)| (self.amplitudes[x ^ mask].conj() * a).re)
            .sum()
    }

    /// `(⟨S_x⟩, ⟨S_x²⟩ - ⟨S_x⟩²)` evaluated with `S_x` as an operator.
    pub fn collective_x(&self) -> (f64, f64) {
        let sx_psi = self.apply_sx();
        let mean: f64 = self
            .amplitudes
            .iter()
            .zip(&sx_psi)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        let second: f64 = sx_psi.iter().map(|v| v.norm_sqr()).sum();
        (mean, second - mean * mean)
    }

    fn apply_sx(&self) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.amplitudes.len()];
        for (y, o) in out.iter_mut().enumerate() {
            for site in 0..self.sites {
                *o += self.amplitudes[y ^ (1 << site)];
            }
        }
        out
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|→→…→⟩`: every amplitude `2^{-L/2}`.
pub fn prepare_x_polarized(sites: usize) -> Result<StateVector> {
    if sites == 0 {
        return Err(Error::Lattice("need at least one site".into()));
    }
    let dim = 1usize << sites;
    let a = C64::new((dim as f64).sqrt().recip(), 0.0);
    StateVector::new(sites, vec![a; dim])
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub max_dim: usize,
    /// Allowed error estimate per substep.
    pub tolerance: f64,
    pub max_sites: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: 30,
            tolerance: 1e-10,
            max_sites: DEFAULT_MAX_SITES,
        }
    }
}

/// Lanczos propagator `exp(-iHt)` with adaptive substeps.
pub struct KrylovPropagator<'a> {
    op: &'a CompiledOperator,
    opts: KrylovOptions,
}

impl<'a> KrylovPropagator<'a> {
    pub fn new(op: &'a CompiledOperator, opts: KrylovOptions) -> Self {
        KrylovPropagator { op, opts }
    }

    /// Advances `psi` in place from `t0` to `t1`.
    pub fn advance(&self, psi: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        let mut t = t0;
        let mut h_try = t1 - t0;
        while t < t1 {
            let remaining = t1 - t;
            let h_max = h_try.min(remaining);
            let taken = self.substep(psi, h_max, t, t1)?;
            t = if taken >= remaining { t1 } else { t + taken };
            // Next attempt: grow a little beyond what succeeded.
            h_try = (taken * 1.5).max(taken);
        }
        Ok(())
    }

    // Returns the step actually taken (<= h_max).
    fn substep(&self, psi: &mut [C64], h_max: f64, t: f64, t_end: f64) -> Result<f64> {
        let dim = psi.len();
        let beta0 = norm(psi);
        if beta0 == 0.0 {
            return Ok(h_max);
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(self.opts.max_dim + 1);
        basis.push(psi.iter().map(|a| a / beta0).collect());
        let mut alpha = Vec::with_capacity(self.opts.max_dim);
        let mut beta = Vec::with_capacity(self.opts.max_dim);
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let mut breakdown = false;
        for k in 0..self.opts.max_dim {
            self.op.apply_into(&basis[k], &mut w);
            let a = dot(&basis[k], &w).re;
            alpha.push(a);
            // Full reorthogonalisation (twice is enough).
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm(&w);
            beta.push(b);
            if b <= 1e-13 * (a.abs() + 1.0) {
                breakdown = true;
                break;
            }
            if k + 1 < self.opts.max_dim {
                basis.push(w.iter().map(|x| x / b).collect());
            }
        }
        let m = alpha.len();
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            tri[(k, k)] = alpha[k];
            if k + 1 < m {
                tri[(k, k + 1)] = beta[k];
                tri[(k + 1, k)] = beta[k];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let coeffs = |h: f64| -> Vec<C64> {
            (0..m)
                .map(|r| {
                    (0..m)
                        .map(|q| {
                            let v = eig.eigenvectors[(r, q)] * eig.eigenvectors[(0, q)];
                            C64::from_polar(v, -eig.eigenvalues[q] * h)
                        })
                        .sum()
                })
                .collect()
        };
        let mut h = h_max;
        let (c, estimate) = loop {
            let c = coeffs(h);
            let estimate = if breakdown {
                0.0
            } else {
                beta0 * beta[m - 1] * c[m - 1].norm()
            };
            if estimate <= self.opts.tolerance {
                break (c, estimate);
            }
            h *= 0.5;
            if h < 1e-12 * h_max.max(1e-300) || h < 1e-15 {
                return Err(Error::KrylovConvergence {
                    t0: t,
                    t1: t_end,
                    estimate,
                });
            }
        };
        let _ = estimate;
        psi.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        for (v, ck) in basis.iter().zip(&c) {
            let s = ck * beta0;
            psi.iter_mut().zip(v).for_each(|(a, x)| *a += s * x);
        }
        Ok(h)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => return Err(Error::TimeGrid("empty time grid".into())),
        Some(&t0) if t0 != 0.0 => return Err(Error::TimeGrid(format!("grid must start at 0, got {t0}"))),
        _ => {}
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::TimeGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Snapshots `exp(-iHt)|psi⟩` at each grid time.
pub fn propagate(state: &StateVector, terms: &TermList, t_grid: &[f64]) -> Result<Vec<StateVector>> {
    propagate_with(state, terms, t_grid, KrylovOptions::default())
}

pub fn propagate_with(
    state: &StateVector,
    terms: &TermList,
    t_grid: &[f64],
    opts: KrylovOptions,
) -> Result<Vec<StateVector>> {
    let mut out = Vec::with_capacity(t_grid.len());
    for_each_snapshot(state, terms, t_grid, opts, |_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Streams snapshots to `visit(index, state)` without retaining them.
pub fn for_each_snapshot<F>(
    state: &StateVector,
    terms: &TermList,
    t_grid: &[f64],
    opts: KrylovOptions,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, &StateVector) -> Result<()>,
{
    check_grid(t_grid)?;
    if state.sites > opts.max_sites {
        return Err(Error::TooLarge {
            sites: state.sites,
            limit: opts.max_sites,
        });
    }
    if terms.site_count() != state.sites {
        return Err(Error::Dimension {
            expected: state.sites,
            got: terms.site_count(),
        });
    }
    let op = CompiledOperator::new(terms);
    let prop = KrylovPropagator::new(&op, opts);
    let mut current = state.clone();
    visit(0, &current)?;
    for (k, w) in t_grid.windows(2).enumerate() {
        if !terms.is_empty() {
            prop.advance(&mut current.amplitudes, w[0], w[1])?;
        }
        visit(k + 1, &current)?;
    }
    Ok(())
}

/// Reduced density matrix of `subsystem`; bit `k` of the row index is
/// `subsystem[k]`.
#[derive(Clone, Debug)]
pub struct ReducedDensity {
    pub subsystem: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

impl ReducedDensity {
    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|v| v.re).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }
}

/// Eigenvalues of a Hermitian matrix, sorted descending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn reduced_density(state: &StateVector, subsystem: &[usize]) -> Result<ReducedDensity> {
    let n = state.sites;
    if subsystem.is_empty() || subsystem.len() >= n {
        return Err(Error::Subsystem(format!(
            "subsystem of {} sites must be a nonempty proper subset of {n}",
            subsystem.len()
        )));
    }
    let mut seen = vec![false; n];
    for &s in subsystem {
        if s >= n || std::mem::replace(&mut seen[s], true) {
            return Err(Error::Subsystem(format!("site {s} out of range or repeated")));
        }
    }
    let env: Vec<usize> = (0..n).filter(|s| !seen[*s]).collect();
    let da = 1usize << subsystem.len();
    let de = 1usize << env.len();
    let mut psi = DMatrix::<C64>::zeros(da, de);
    for (x, amp) in state.amplitudes.iter().enumerate() {
        let a = subsystem
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &s)| acc | (((x >> s) & 1) << k));
        let e = env
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &s)| acc | (((x >> s) & 1) << k));
        psi[(a, e)] = *amp;
    }
    let matrix = &psi * psi.adjoint();
    Ok(ReducedDensity {
        subsystem: subsystem.to_vec(),
        matrix,
    })
}

/// Eigenvalues at or below this contribute nothing to the entropy.
pub const ENTROPY_CLIP: f64 = 1e-14;

/// `-Σ λ ln λ` over the spectrum of a density matrix.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > ENTROPY_CLIP)
        .map(|&l| -l * l.ln())
        .sum()
}

pub fn von_neumann_entropy(rho: &ReducedDensity) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"SPDSNAP1";

/// Binary debug dump: magic, site count, snapshot count, then per snapshot the
/// time followed by interleaved (re, im) amplitudes, all little endian.
pub fn write_snapshots<W: Write>(mut out: W, times: &[f64], states: &[StateVector]) -> Result<()> {
    if times.len() != states.len() {
        return Err(Error::Dimension {
            expected: times.len(),
            got: states.len(),
        });
    }
    let sites = states.first().map(|s| s.sites).unwrap_or(0);
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&(sites as u64).to_le_bytes())?;
    out.write_all(&(states.len() as u64).to_le_bytes())?;
    for (t, s) in times.iter().zip(states) {
        out.write_all(&t.to_le_bytes())?;
        for a in &s.amplitudes {
            out.write_all(&a.re.to_le_bytes())?;
            out.write_all(&a.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshots<R: Read>(mut input: R) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("not a snapshot dump".into()));
    }
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let sites = u64::from_le_bytes(next(&mut input)?) as usize;
    let count = u64::from_le_bytes(next(&mut input)?) as usize;
    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        times.push(f64::from_le_bytes(next(&mut input)?));
        let mut amps = Vec::with_capacity(1 << sites);
        for _ in 0..(1usize << sites) {
            let re = f64::from_le_bytes(next(&mut input)?);
            let im = f64::from_le_bytes(next(&mut input)?);
            amps.push(C64::new(re, im));
        }
        states.push(StateVector::new(sites, amps)?);
    }
    Ok((times, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::heisenberg_terms;
    use crate::lattice::{build_couplings, build_lattice, CouplingMode, Geometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn terms(n: usize, alpha: f64, j: [f64; 3]) -> TermList {
        let lat = build_lattice(Geometry::Chain { len: n }).unwrap();
        heisenberg_terms(&build_couplings(&lat, alpha, j, CouplingMode::PowerLaw).unwrap())
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<C64> = (0..(1usize << n))
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|a| *a /= nv);
        StateVector::new(n, v).unwrap()
    }

    fn grid(step: f64, t_max: f64) -> Vec<f64> {
        let n = (t_max / step).round() as usize;
        (0..=n).map(|k| k as f64 * step).collect()
    }

    #[test]
    fn x_polarized_amplitudes() {
        let s = prepare_x_polarized(1).unwrap();
        let h = 0.5f64.sqrt();
        assert!(s.amplitudes().iter().all(|a| (a.re - h).abs() < 1e-15));
        let s = prepare_x_polarized(2).unwrap();
        assert!(s.amplitudes().iter().all(|a| *a == C64::new(0.5, 0.0)));
        let s = prepare_x_polarized(10).unwrap();
        let (sx, dsx) = s.collective_x();
        assert!((sx - 10.0).abs() < 1e-12);
        assert!(dsx.abs() < 1e-10);
        assert!(prepare_x_polarized(0).is_err());
    }

    #[test]
    fn empty_hamiltonian_freezes_state() {
        let s = random_state(4, 3);
        let snaps = propagate(&s, &TermList::empty(4), &[0.0, 0.5, 1.0]).unwrap();
        assert!(snaps.iter().all(|x| x == &s));
    }

    #[test]
    fn two_site_ising_cosine() {
        let s = prepare_x_polarized(2).unwrap();
        let t = grid(0.1, 3.0);
        let snaps = propagate(&s, &terms(2, 0.0, [0.0, 0.0, 1.0]), &t).unwrap();
        for (tk, st) in t.iter().zip(&snaps) {
            assert!((st.one_point_x(0) - (2.0 * tk).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn norm_and_energy_conserved() {
        let h = terms(10, 3.0, [0.5, 1.0, 0.25]);
        let op = CompiledOperator::new(&h);
        let s = random_state(10, 1);
        let e0 = op.expectation(s.amplitudes());
        let snaps = propagate(&s, &h, &grid(0.25, 3.0)).unwrap();
        for st in &snaps {
            assert!((st.norm() - 1.0).abs() < 1e-10);
            assert!((op.expectation(st.amplitudes()) - e0).abs() < 1e-8);
        }
    }

    #[test]
    fn propagation_is_linear() {
        let h = terms(6, 0.0, [0.5, 1.0, 0.25]);
        let a = random_state(6, 10);
        let b = random_state(6, 11);
        let (ca, cb) = (C64::new(0.6, 0.1), C64::new(-0.2, 0.7));
        let sum: Vec<C64> = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| ca * x + cb * y)
            .collect();
        let sum = StateVector::new(6, sum).unwrap();
        let t = [0.0, 1.3];
        let pa = propagate(&a, &h, &t).unwrap();
        let pb = propagate(&b, &h, &t).unwrap();
        let ps = propagate(&sum, &h, &t).unwrap();
        for k in 0..(1 << 6) {
            let want = ca * pa[1].amplitudes()[k] + cb * pb[1].amplitudes()[k];
            assert!((want - ps[1].amplitudes()[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn grid_and_size_guards() {
        let s = prepare_x_polarized(3).unwrap();
        let h = terms(3, 0.0, [0.0, 0.0, 1.0]);
        assert!(propagate(&s, &h, &[0.1, 0.2]).is_err());
        assert!(propagate(&s, &h, &[0.0, 0.2, 0.2]).is_err());
        let opts = KrylovOptions {
            max_sites: 2,
            ..Default::default()
        };
        assert!(matches!(
            propagate_with(&s, &h, &[0.0], opts),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn reduced_density_cases() {
        let p = prepare_x_polarized(4).unwrap();
        let rho = reduced_density(&p, &[1, 2]).unwrap();
        let ev = rho.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && ev[1..].iter().all(|v| v.abs() < 1e-12));
        assert!(von_neumann_entropy(&rho).abs() < 1e-12);

        let h = 0.5f64.sqrt();
        let z = C64::new(0.0, 0.0);
        let bell = StateVector::new(2, vec![C64::new(h, 0.0), z, z, C64::new(h, 0.0)]).unwrap();
        let rho = reduced_density(&bell, &[0]).unwrap();
        assert!((rho.matrix[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho.matrix[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(rho.matrix[(0, 1)].norm() < 1e-15);
        assert!((von_neumann_entropy(&rho) - LN_2).abs() < 1e-12);

        let r = random_state(8, 4);
        let rho = reduced_density(&r, &[3, 6]).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(rho.eigenvalues().iter().all(|&l| l >= -1e-12));

        assert!(reduced_density(&r, &[]).is_err());
        assert!(reduced_density(&r, &(0..8).collect::<Vec<_>>()).is_err());
        assert!(reduced_density(&r, &[2, 2]).is_err());
        assert!(reduced_density(&r, &[9]).is_err());
    }

    #[test]
    fn maximally_mixed_three_sites() {
        let m = ReducedDensity {
            subsystem: vec![0, 1, 2],
            matrix: DMatrix::<C64>::identity(8, 8) * C64::new(0.125, 0.0),
        };
        let s = von_neumann_entropy(&m);
        assert!((s - 3.0 * LN_2).abs() < 1e-12);
        assert!((s - 2.0794).abs() < 1e-4);
    }

    #[test]
    fn entropy_is_symmetric_across_the_cut() {
        let h = terms(8, 0.0, [0.5, 1.0, 0.25]);
        let snaps = propagate(&prepare_x_polarized(8).unwrap(), &h, &[0.0, 0.7]).unwrap();
        for st in [&snaps[1], &random_state(8, 2)] {
            let a = reduced_density(st, &[0, 1, 5]).unwrap();
            let b = reduced_density(st, &[2, 3, 4, 6, 7]).unwrap();
            assert!((von_neumann_entropy(&a) - von_neumann_entropy(&b)).abs() < 1e-10);
        }
    }

    #[test]
    fn collective_matches_pair_sum() {
        let r = random_state(6, 12);
        let (sx, dsx) = r.collective_x();
        let one: Vec<f64> = (0..6).map(|i| r.one_point_x(i)).collect();
        let mut second = 6.0;
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    second += r.two_point_x(i, j);
                }
            }
        }
        let mean: f64 = one.iter().sum();
        assert!((sx - mean).abs() < 1e-12);
        assert!((dsx - (second - mean * mean)).abs() < 1e-10);
    }

    #[test]
    fn snapshot_dump_round_trip() {
        let s = random_state(3, 1);
        let mut buf = Vec::new();
        write_snapshots(&mut buf, &[0.0, 0.5], &[s.clone(), s.clone()]).unwrap();
        let (t, st) = read_snapshots(&buf[..]).unwrap();
        assert_eq!(t, vec![0.0, 0.5]);
        assert_eq!(st[1], s);
    }
}
