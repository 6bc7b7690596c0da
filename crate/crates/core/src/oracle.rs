//! Closed-form dynamics of the Ising model (`J^x = J^y = 0`) from the
//! x-polarized product state.
//!
//! Writing `σ^x = σ^+ + σ^-`, each raising/lowering operator picks up a phase
//! `exp(∓2it Σ_k J_ik σ^z_k)` and the z-average over the initial state turns
//! every phase into a cosine:
//!
//! * `⟨σ^x_i⟩ = Π_{k≠i} cos(2t J_ki)`
//! * `⟨σ^x_i σ^x_j⟩ = ½ Π_{k≠i,j} cos[2t(J_ki + J_kj)] + ½ Π_{k≠i,j} cos[2t(J_ki − J_kj)]`
//!
//! DTWA reproduces the one-point function but its two-point channels carry an
//! extra `cos²(2t J_ij)` from the `k ∈ {i, j}` factors of the classical
//! product.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{sample_disorder, CouplingMatrix, LatticeSpec};
use crate::observables::{assemble, ensemble_average, ObservableSeries, SeriesMeta};

#[derive(Clone, Debug)]
pub struct IsingCase {
    couplings: CouplingMatrix,
}

impl IsingCase {
    pub fn new(couplings: CouplingMatrix) -> Result<Self> {
        if !couplings.is_ising() {
            return Err(Error::Couplings("closed-form oracle requires J^x = J^y = 0".into()));
        }
        Ok(IsingCase { couplings })
    }

    pub fn couplings(&self) -> &CouplingMatrix {
        &self.couplings
    }

    pub fn site_count(&self) -> usize {
        self.couplings.site_count()
    }

    #[inline]
    fn jz(&self, i: usize, j: usize) -> f64 {
        self.couplings.get(2, i, j)
    }

    /// `⟨σ^x_i⟩(t)`.
    pub fn one_point_x(&self, i: usize, t: f64) -> f64 {
        (0..self.site_count())
            .filter(|&k| k != i)
            .map(|k| (2.0 * t * self.jz(k, i)).cos())
            .product()
    }

    // (Π cos[2t(J_ki + J_kj)], Π cos[2t(J_ki − J_kj)]) over k ∉ {i, j}
    fn channel_products(&self, i: usize, j: usize, t: f64) -> (f64, f64) {
        let mut plus = 1.0;
        let mut minus = 1.0;
        for k in 0..self.site_count() {
            if k == i || k == j {
                continue;
            }
            let (a, b) = (self.jz(k, i), self.jz(k, j));
            if a == 0.0 && b == 0.0 {
                continue;
            }
            plus *= (2.0 * t * (a + b)).cos();
            minus *= (2.0 * t * (a - b)).cos();
        }
        (plus, minus)
    }

    /// `⟨σ^x_i σ^x_j⟩(t)` for `i != j`.
    pub fn two_point_x(&self, i: usize, j: usize, t: f64) -> Result<f64> {
        if i == j {
            return Err(Error::Invalid(format!("two-point function needs i != j (got {i})")));
        }
        let (plus, minus) = self.channel_products(i, j, t);
        Ok(0.5 * (plus + minus))
    }

    /// Exact `⟨σ^x_i σ^x_j⟩` and the infinite-sample DTWA prediction, which
    /// multiplies each `±` channel by `cos²(2t J_ij)`.
    pub fn dtwa_identity_check(&self, i: usize, j: usize, t: f64) -> Result<(f64, f64)> {
        let exact = self.two_point_x(i, j, t)?;
        let (plus, minus) = self.channel_products(i, j, t);
        let damp = (2.0 * t * self.jz(i, j)).cos().powi(2);
        Ok((exact, 0.5 * (plus * damp + minus * damp)))
    }

    /// Per-site one-point values and the full pair table at time `t`.
    pub fn primitives(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.site_count();
        let one: Vec<f64> = (0..n).map(|i| self.one_point_x(i, t)).collect();
        let mut two = vec![1.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (p, m) = self.channel_products(i, j, t);
                let v = 0.5 * (p + m);
                two[i * n + j] = v;
                two[j * n + i] = v;
            }
        }
        (one, two)
    }

    pub fn collective_series(&self, t_grid: &[f64]) -> ObservableSeries {
        let mut meta = SeriesMeta::new("oracle", self.site_count());
        meta.couplings = self.couplings.fingerprint();
        meta.seeds = self.couplings.seed().into_iter().collect();
        let mut series = ObservableSeries::new(t_grid.to_vec(), meta);
        let values: Vec<(f64, f64)> = t_grid
            .par_iter()
            .map(|&t| {
                let (one, two) = self.primitives(t);
                assemble(&one, &two).expect("consistent shapes")
            })
            .collect();
        for (k, (sx, dsx)) in values.into_iter().enumerate() {
            series.sx[k] = sx;
            series.dsx[k] = dsx;
        }
        series
    }
}

/// Oracle series for realizations with seeds `base_seed + r`, `r < realizations`,
/// and their per-time arithmetic mean (with standard errors).
pub fn disorder_ensemble(
    lattice: &LatticeSpec,
    alpha: f64,
    base_seed: u64,
    realizations: usize,
    t_grid: &[f64],
) -> Result<(ObservableSeries, Vec<ObservableSeries>)> {
    let runs: Vec<ObservableSeries> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let c = sample_disorder(lattice, alpha, base_seed.wrapping_add(r as u64))?;
            Ok(IsingCase::new(c)?.collective_series(t_grid))
        })
        .collect::<Result<_>>()?;
    let mean = ensemble_average(&runs)?;
    Ok((mean, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_couplings, build_lattice, CouplingMode, Geometry};
    use std::f64::consts::FRAC_PI_2;

    fn case(n: usize, alpha: f64) -> IsingCase {
        let lat = build_lattice(Geometry::Chain { len: n }).unwrap();
        IsingCase::new(build_couplings(&lat, alpha, [0.0, 0.0, 1.0], CouplingMode::PowerLaw).unwrap()).unwrap()
    }

    #[test]
    fn rejects_non_ising() {
        let lat = build_lattice(Geometry::Chain { len: 3 }).unwrap();
        let c = build_couplings(&lat, 0.0, [0.5, 1.0, 0.25], CouplingMode::PowerLaw).unwrap();
        assert!(IsingCase::new(c).is_err());
    }

    #[test]
    fn initial_values() {
        let c = case(6, 3.0);
        for i in 0..6 {
            assert_eq!(c.one_point_x(i, 0.0), 1.0);
            for j in 0..6 {
                if i != j {
                    assert_eq!(c.two_point_x(i, j, 0.0).unwrap(), 1.0);
                    assert_eq!(c.dtwa_identity_check(i, j, 0.0).unwrap(), (1.0, 1.0));
                }
            }
        }
        let s = c.collective_series(&[0.0]);
        assert_eq!((s.sx[0], s.dsx[0]), (6.0, 0.0));
        assert!(c.two_point_x(2, 2, 0.3).is_err());
    }

    #[test]
    fn all_to_all_revival() {
        for n in [2usize, 5, 8] {
            let c = case(n, 0.0);
            let t = 0.37;
            assert!((c.one_point_x(0, t) - (2.0 * t).cos().powi(n as i32 - 1)).abs() < 1e-14);
            let v = c.one_point_x(1, FRAC_PI_2);
            assert!((v - (-1f64).powi(n as i32 - 1)).abs() < 1e-12);
        }
        let big = case(32, 0.0).collective_series(&[FRAC_PI_2]);
        assert!((big.sx[0].abs() - 32.0).abs() < 1e-9);
    }

    #[test]
    fn two_sites_have_constant_correlator() {
        let c = case(2, 0.0);
        for t in [0.0, 0.4, 1.7, 2.9] {
            assert_eq!(c.two_point_x(0, 1, t).unwrap(), 1.0);
        }
    }

    #[test]
    fn dtwa_channel_vanishes_at_quarter_period() {
        let c = case(4, 0.0);
        let t = std::f64::consts::FRAC_PI_4;
        let (exact, dtwa) = c.dtwa_identity_check(0, 1, t).unwrap();
        assert!(dtwa.abs() < 1e-30 || dtwa.abs() < 1e-15 * exact.abs().max(1.0));
    }

    #[test]
    fn bounded_and_symmetric() {
        let c = case(7, 0.0);
        for t in [0.1, 0.9, 2.3] {
            let a = c.one_point_x(0, t);
            let b = c.two_point_x(0, 1, t).unwrap();
            for i in 0..7 {
                assert!((c.one_point_x(i, t) - a).abs() < 1e-14);
                for j in 0..7 {
                    if i != j {
                        assert!((c.two_point_x(i, j, t).unwrap() - b).abs() < 1e-14);
                    }
                }
            }
        }
        let d = case(9, 3.0);
        for t in [0.0, 0.5, 1.0, 2.5] {
            for i in 0..9 {
                assert!(d.one_point_x(i, t).abs() <= 1.0);
                for j in 0..9 {
                    if i != j {
                        assert!(d.two_point_x(i, j, t).unwrap().abs() <= 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn disorder_ensemble_reproducible() {
        let lat = build_lattice(Geometry::Chain { len: 6 }).unwrap();
        let t = [0.0, 0.5, 1.0];
        let (a, runs) = disorder_ensemble(&lat, 3.0, 100, 4, &t).unwrap();
        let (b, _) = disorder_ensemble(&lat, 3.0, 100, 4, &t).unwrap();
        assert_eq!(a, b);
        assert_eq!(runs.len(), 4);
        assert_eq!(a.meta.seeds, vec![100, 101, 102, 103]);
        assert_eq!(a.sx[0], 6.0);
    }
}
