//! Discrete truncated Wigner approximation.
//!
//! Each trajectory starts from `s^x = 1` and independent `s^y, s^z = ±1`
//! (the discrete Wigner function of `|→⟩`), then precesses classically under
//! `H_C = -Σ_{i<j} Σ_β J^β_ij s^β_i s^β_j` via `ṡ_i = 2 s_i × ∂H_C/∂s_i`.
//! Observables are trajectory averages; two-point functions use `s^x_i s^x_j`
//! for `i != j` and the operator identity `(σ^x)² = 1` on the diagonal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::CouplingMatrix;
use crate::observables::{ObservableSeries, SeriesMeta};

pub const DEFAULT_TRAJECTORIES: usize = 10_000;
pub const DEFAULT_DT: f64 = 0.005;
/// Upper bound on `ω·h` for the fastest local precession frequency `ω`.
pub const MAX_PHASE_PER_STEP: f64 = 0.03;
pub const NORM_TOLERANCE: f64 = 1e-6;
pub const ENERGY_TOLERANCE: f64 = 1e-6;

const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalConfig {
    pub spins: Vec<[f64; 3]>,
}

impl ClassicalConfig {
    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub trajectories: usize,
    pub seed: u64,
    /// Largest RK4 step; the step actually used is also capped by
    /// `MAX_PHASE_PER_STEP / ω_max` for the given couplings.
    pub dt: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            trajectories: DEFAULT_TRAJECTORIES,
            seed: 0,
            dt: DEFAULT_DT,
        }
    }
}

/// Classical counterpart of the quantum Hamiltonian, sharing its couplings.
#[derive(Clone, Debug)]
pub struct ClassicalHamiltonian {
    couplings: CouplingMatrix,
    active: Vec<usize>,
}

impl ClassicalHamiltonian {
    pub fn new(couplings: CouplingMatrix) -> Self {
        let active = (0..3)
            .filter(|&a| couplings.axis(a).iter().any(|&v| v != 0.0))
            .collect();
        ClassicalHamiltonian { couplings, active }
    }

    pub fn couplings(&self) -> &CouplingMatrix {
        &self.couplings
    }

    pub fn site_count(&self) -> usize {
        self.couplings.site_count()
    }

    /// `H_C` of a configuration.
    pub fn energy(&self, config: &ClassicalConfig) -> f64 {
        let n = self.site_count();
        let mut e = 0.0;
        for &a in &self.active {
            let j = self.couplings.axis(a);
            for i in 0..n {
                for k in (i + 1)..n {
                    e -= j[i * n + k] * config.spins[i][a] * config.spins[k][a];
                }
            }
        }
        e
    }

    // field[i] = ∂H_C/∂s_i
    fn gradient(&self, spins: &[[f64; 3]], field: &mut [[f64; 3]]) {
        let n = spins.len();
        field.iter_mut().for_each(|f| *f = [0.0; 3]);
        for &a in &self.active {
            let j = self.couplings.axis(a);
            for (i, f) in field.iter_mut().enumerate() {
                let row = &j[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for (jv, s) in row.iter().zip(spins) {
                    acc += jv * s[a];
                }
                f[a] = -acc;
            }
        }
    }

    fn derivative(&self, spins: &[[f64; 3]], field: &mut [[f64; 3]], out: &mut [[f64; 3]]) {
        self.gradient(spins, field);
        for ((s, h), d) in spins.iter().zip(field.iter()).zip(out.iter_mut()) {
            *d = [
                2.0 * (s[1] * h[2] - s[2] * h[1]),
                2.0 * (s[2] * h[0] - s[0] * h[2]),
                2.0 * (s[0] * h[1] - s[1] * h[0]),
            ];
        }
    }

    /// Bound on the fastest precession frequency `2|∂H_C/∂s_i|`.
    pub fn max_frequency(&self) -> f64 {
        let n = self.site_count();
        // Ising spins keep |s^z| = 1; otherwise components are bounded by |s| = √3.
        let c = if self.couplings.is_ising() { 1.0 } else { 3f64.sqrt() };
        (0..n)
            .map(|i| {
                let sq: f64 = (0..3)
                    .map(|a| {
                        let row: f64 = (0..n).map(|k| self.couplings.get(a, i, k).abs()).sum();
                        (c * row).powi(2)
                    })
                    .sum();
                2.0 * sq.sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Initial configuration of trajectory `index`: `s^x = 1`, `s^y, s^z = ±1`
/// drawn from a ChaCha stream keyed by `(seed, index)` in site order.
pub fn sample_initial(sites: usize, seed: u64, index: u64) -> ClassicalConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut pm = || if rng.random::<bool>() { 1.0 } else { -1.0 };
    let spins = (0..sites).map(|_| [1.0, pm(), pm()]).collect();
    ClassicalConfig { spins }
}

/// Time derivative `ṡ_i = 2 s_i × ∂H_C/∂s_i`. For Ising couplings this is
/// `ṡ^x = -2 s^y B`, `ṡ^y = 2 s^x B`, `ṡ^z = 0` with `B_i = Σ_j J^z_ij s^z_j`.
pub fn eom_rhs(config: &ClassicalConfig, h: &ClassicalHamiltonian) -> ClassicalConfig {
    let n = config.len();
    let mut field = vec![[0.0; 3]; n];
    let mut out = vec![[0.0; 3]; n];
    h.derivative(&config.spins, &mut field, &mut out);
    ClassicalConfig { spins: out }
}

struct Rk4Work {
    k: [Vec<[f64; 3]>; 4],
    tmp: Vec<[f64; 3]>,
    field: Vec<[f64; 3]>,
}

impl Rk4Work {
    fn new(n: usize) -> Self {
        let z = vec![[0.0; 3]; n];
        Rk4Work {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z.clone(),
            field: z,
        }
    }
}

fn rk4_step(h: &ClassicalHamiltonian, s: &mut [[f64; 3]], dt: f64, w: &mut Rk4Work) {
    let n = s.len();
    let [k1, k2, k3, k4] = &mut w.k;
    h.derivative(s, &mut w.field, k1);
    for i in 0..n {
        for a in 0..3 {
            w.tmp[i][a] = s[i][a] + 0.5 * dt * k1[i][a];
        }
    }
    h.derivative(&w.tmp, &mut w.field, k2);
    for i in 0..n {
        for a in 0..3 {
            w.tmp[i][a] = s[i][a] + 0.5 * dt * k2[i][a];
        }
    }
    h.derivative(&w.tmp, &mut w.field, k3);
    for i in 0..n {
        for a in 0..3 {
            w.tmp[i][a] = s[i][a] + dt * k3[i][a];
        }
    }
    h.derivative(&w.tmp, &mut w.field, k4);
    for i in 0..n {
        for a in 0..3 {
            s[i][a] += dt / 6.0 * (k1[i][a] + 2.0 * k2[i][a] + 2.0 * k3[i][a] + k4[i][a]);
        }
    }
}

/// Which sampled quantities to keep beyond the collective columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DtwaObservables {
    pub one_point: bool,
    pub two_point: bool,
}

/// Per-time sampled estimates with standard errors.
#[derive(Clone, Debug)]
pub struct DtwaResult {
    pub series: ObservableSeries,
    /// `[time][site]` estimates of `⟨σ^x_i⟩`.
    pub one_point: Vec<Vec<f64>>,
    pub one_point_stderr: Vec<Vec<f64>>,
    /// `[time][pair]` estimates of `⟨σ^x_i σ^x_j⟩`, pairs `(i<j)` in row-major order.
    pub two_point: Vec<Vec<f64>>,
    pub two_point_stderr: Vec<Vec<f64>>,
    pub step: f64,
    /// Worst per-trajectory `| |s_i|² - 3 |` seen at any grid time.
    pub max_norm_drift: f64,
    /// Worst per-trajectory `|H_C(t) - H_C(0)|` seen at any grid time.
    pub max_energy_drift: f64,
}

/// Index of pair `(i, j)`, `i < j`, in row-major upper-triangle order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

#[derive(Clone)]
struct Accumulator {
    x: Vec<f64>,
    x2: Vec<f64>,
    q: Vec<f64>,
    q2: Vec<f64>,
    qx: Vec<f64>,
    site: Vec<Vec<f64>>,
    site2: Vec<Vec<f64>>,
    pair: Vec<Vec<f64>>,
    pair2: Vec<Vec<f64>>,
    norm_drift: f64,
    energy_drift: f64,
}

impl Accumulator {
    fn new(times: usize, sites: usize, obs: DtwaObservables) -> Self {
        let per = |on: bool, width: usize| {
            if on {
                vec![vec![0.0; width]; times]
            } else {
                Vec::new()
            }
        };
        let pairs = sites * sites.saturating_sub(1) / 2;
        Accumulator {
            x: vec![0.0; times],
            x2: vec![0.0; times],
            q: vec![0.0; times],
            q2: vec![0.0; times],
            qx: vec![0.0; times],
            site: per(obs.one_point, sites),
            site2: per(obs.one_point, sites),
            pair: per(obs.two_point, pairs),
            pair2: per(obs.two_point, pairs),
            norm_drift: 0.0,
            energy_drift: 0.0,
        }
    }

    fn record(&mut self, k: usize, s: &[[f64; 3]]) {
        let n = s.len();
        let x: f64 = s.iter().map(|v| v[0]).sum();
        let sq: f64 = s.iter().map(|v| v[0] * v[0]).sum();
        // Σ_{i≠j} s_i s_j + L: the diagonal uses (σ^x)² = 1.
        let q = x * x - sq + n as f64;
        self.x[k] += x;
        self.x2[k] += x * x;
        self.q[k] += q;
        self.q2[k] += q * q;
        self.qx[k] += q * x;
        if !self.site.is_empty() {
            for (i, v) in s.iter().enumerate() {
                self.site[k][i] += v[0];
                self.site2[k][i] += v[0] * v[0];
            }
        }
        if !self.pair.is_empty() {
            let mut p = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = s[i][0] * s[j][0];
                    self.pair[k][p] += v;
                    self.pair2[k][p] += v * v;
                    p += 1;
                }
            }
        }
    }

    fn merge(&mut self, o: &Accumulator) {
        fn add(a: &mut [f64], b: &[f64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        fn add2(a: &mut [Vec<f64>], b: &[Vec<f64>]) {
            a.iter_mut().zip(b).for_each(|(x, y)| add(x, y));
        }
        add(&mut self.x, &o.x);
        add(&mut self.x2, &o.x2);
        add(&mut self.q, &o.q);
        add(&mut self.q2, &o.q2);
        add(&mut self.qx, &o.qx);
        add2(&mut self.site, &o.site);
        add2(&mut self.site2, &o.site2);
        add2(&mut self.pair, &o.pair);
        add2(&mut self.pair2, &o.pair2);
        self.norm_drift = self.norm_drift.max(o.norm_drift);
        self.energy_drift = self.energy_drift.max(o.energy_drift);
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first() != Some(&0.0) {
        return Err(Error::TimeGrid("grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::TimeGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Step size actually used by `run_ensemble`.
pub fn effective_step(h: &ClassicalHamiltonian, dt: f64) -> f64 {
    let w = h.max_frequency();
    if w > 0.0 {
        dt.min(MAX_PHASE_PER_STEP / w)
    } else {
        dt
    }
}

/// Propagates one trajectory over the grid, calling `visit(k, spins)` at
/// each grid time. Returns the worst norm and energy drifts.
pub fn integrate_trajectory<F>(
    h: &ClassicalHamiltonian,
    initial: &ClassicalConfig,
    t_grid: &[f64],
    step: f64,
    mut visit: F,
) -> (f64, f64)
where
    F: FnMut(usize, &[[f64; 3]]),
{
    let mut s = initial.spins.clone();
    let mut work = Rk4Work::new(s.len());
    let e0 = h.energy(initial);
    let mut norm_drift: f64 = 0.0;
    let mut energy_drift: f64 = 0.0;
    let mut probe = ClassicalConfig { spins: Vec::new() };
    visit(0, &s);
    for (k, w) in t_grid.windows(2).enumerate() {
        let span = w[1] - w[0];
        let substeps = (span / step - 1e-9).ceil().max(1.0) as usize;
        let dt = span / substeps as f64;
        for _ in 0..substeps {
            rk4_step(h, &mut s, dt, &mut work);
        }
        for v in &s {
            let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            norm_drift = norm_drift.max((n2 - 3.0).abs());
        }
        probe.spins.clone_from(&s);
        energy_drift = energy_drift.max((h.energy(&probe) - e0).abs());
        visit(k + 1, &s);
    }
    (norm_drift, energy_drift)
}

/// Samples `spec.trajectories` trajectories and averages the requested
/// observables. Fails if any trajectory violates the conservation tolerances.
pub fn run_ensemble(
    h: &ClassicalHamiltonian,
    spec: &EnsembleSpec,
    t_grid: &[f64],
    observables: DtwaObservables,
) -> Result<DtwaResult> {
    check_grid(t_grid)?;
    if spec.trajectories == 0 {
        return Err(Error::Invalid("need at least one trajectory".into()));
    }
    if !(spec.dt > 0.0) {
        return Err(Error::Invalid(format!(
            "integrator step must be positive, got {}",
            spec.dt
        )));
    }
    let n = h.site_count();
    let nt = t_grid.len();
    let step = effective_step(h, spec.dt);
    let chunks: Vec<(usize, usize)> = (0..spec.trajectories)
        .step_by(CHUNK)
        .map(|lo| (lo, (lo + CHUNK).min(spec.trajectories)))
        .collect();
    let partials: Vec<Accumulator> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = Accumulator::new(nt, n, observables);
            for traj in lo..hi {
                let init = sample_initial(n, spec.seed, traj as u64);
                let e0 = h.energy(&init);
                let (nd, ed) = integrate_trajectory(h, &init, t_grid, step, |k, s| acc.record(k, s));
                if nd > NORM_TOLERANCE {
                    return Err(Error::Instability {
                        trajectory: traj,
                        quantity: "|s|^2",
                        drift: nd,
                        tolerance: NORM_TOLERANCE,
                    });
                }
                let etol = ENERGY_TOLERANCE * e0.abs() + 1e-9;
                if ed > etol {
                    return Err(Error::Instability {
                        trajectory: traj,
                        quantity: "H_C",
                        drift: ed,
                        tolerance: etol,
                    });
                }
                acc.norm_drift = acc.norm_drift.max(nd);
                acc.energy_drift = acc.energy_drift.max(ed);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Accumulator::new(nt, n, observables);
    for p in &partials {
        total.merge(p);
    }

    let m = spec.trajectories as f64;
    let stderr = |sum: f64, sum2: f64| -> f64 {
        if spec.trajectories < 2 {
            return 0.0;
        }
        let mean = sum / m;
        let var = ((sum2 - m * mean * mean) / (m - 1.0)).max(0.0);
        (var / m).sqrt()
    };

    let mut meta = SeriesMeta::new("dtwa", n)
        .with("n_t", spec.trajectories)
        .with("dt", step)
        .with("seed", spec.seed);
    meta.couplings = h.couplings.fingerprint();
    meta.seeds = vec![spec.seed];
    let mut series = ObservableSeries::new(t_grid.to_vec(), meta);
    let mut err_sx = vec![0.0; nt];
    let mut err_dsx = vec![0.0; nt];
    for k in 0..nt {
        let mx = total.x[k] / m;
        let mq = total.q[k] / m;
        series.sx[k] = mx;
        series.dsx[k] = mq - mx * mx;
        err_sx[k] = stderr(total.x[k], total.x2[k]);
        // Delta method for q - X²: var(q - 2⟨X⟩X).
        if spec.trajectories > 1 {
            let var_x = (total.x2[k] / m - mx * mx) * m / (m - 1.0);
            let var_q = (total.q2[k] / m - mq * mq) * m / (m - 1.0);
            let cov = (total.qx[k] / m - mq * mx) * m / (m - 1.0);
            let var = (var_q - 4.0 * mx * cov + 4.0 * mx * mx * var_x).max(0.0);
            err_dsx[k] = (var / m).sqrt();
        }
    }
    series.stderr_sx = Some(err_sx);
    series.stderr_dsx = Some(err_dsx);

    let table = |sum: &[Vec<f64>], sum2: &[Vec<f64>]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mean = sum.iter().map(|r| r.iter().map(|v| v / m).collect()).collect();
        let err = sum
            .iter()
            .zip(sum2)
            .map(|(r, r2)| r.iter().zip(r2).map(|(a, b)| stderr(*a, *b)).collect())
            .collect();
        (mean, err)
    };
    let (one_point, one_point_stderr) = table(&total.site, &total.site2);
    let (two_point, two_point_stderr) = table(&total.pair, &total.pair2);
    Ok(DtwaResult {
        series,
        one_point,
        one_point_stderr,
        two_point,
        two_point_stderr,
        step,
        max_norm_drift: total.norm_drift,
        max_energy_drift: total.energy_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_couplings, build_lattice, CouplingMode, Geometry};

    fn ham(n: usize, alpha: f64, j: [f64; 3]) -> ClassicalHamiltonian {
        let lat = build_lattice(Geometry::Chain { len: n }).unwrap();
        ClassicalHamiltonian::new(build_couplings(&lat, alpha, j, CouplingMode::PowerLaw).unwrap())
    }

    #[test]
    fn initial_sampling_rule() {
        for idx in 0..20 {
            let c = sample_initial(9, 5, idx);
            for s in &c.spins {
                assert_eq!(s[0], 1.0);
                assert!(s[1].abs() == 1.0 && s[2].abs() == 1.0);
                assert_eq!(s[0] * s[0] + s[1] * s[1] + s[2] * s[2], 3.0);
            }
        }
        assert_eq!(sample_initial(9, 5, 3), sample_initial(9, 5, 3));
        assert_ne!(sample_initial(9, 5, 3), sample_initial(9, 5, 4));
    }

    #[test]
    fn initial_sz_is_unbiased() {
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|k| sample_initial(1, 77, k as u64).spins[0][2])
            .sum::<f64>()
            / draws as f64;
        assert!(mean.abs() <= 4.0 / (draws as f64).sqrt());
    }

    #[test]
    fn rhs_cases() {
        let h = ham(2, 0.0, [0.0, 0.0, 1.0]);
        let c = ClassicalConfig {
            spins: vec![[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]],
        };
        let d = eom_rhs(&c, &h);
        assert_eq!(d.spins[0][0], -2.0);
        assert_eq!(d.spins[0][1], 2.0);
        assert_eq!(d.spins[0][2], 0.0);

        let free = ham(1, 0.0, [0.0, 0.0, 1.0]);
        let single = ClassicalConfig {
            spins: vec![[1.0, -1.0, 1.0]],
        };
        assert_eq!(eom_rhs(&single, &free).spins, vec![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn rhs_matches_closed_form_derivative() {
        // s^+(t) = s^+(0) exp(2it B): d/dt s^x = -2 B s^y, d/dt s^y = 2 B s^x.
        let h = ham(4, 3.0, [0.0, 0.0, 1.0]);
        let c = sample_initial(4, 1, 0);
        let d = eom_rhs(&c, &h);
        for i in 0..4 {
            let b: f64 = (0..4).map(|j| h.couplings().get(2, i, j) * c.spins[j][2]).sum();
            assert!((d.spins[i][0] + 2.0 * b * c.spins[i][1]).abs() < 1e-15);
            assert!((d.spins[i][1] - 2.0 * b * c.spins[i][0]).abs() < 1e-15);
        }
    }

    #[test]
    fn ising_trajectory_is_exact_rotation() {
        let h = ham(6, 3.0, [0.0, 0.0, 1.0]);
        let init = sample_initial(6, 3, 2);
        let grid: Vec<f64> = (0..=30).map(|k| k as f64 * 0.1).collect();
        let step = effective_step(&h, DEFAULT_DT);
        let mut worst: f64 = 0.0;
        integrate_trajectory(&h, &init, &grid, step, |k, s| {
            let t = grid[k];
            for (i, si) in s.iter().enumerate() {
                assert_eq!(si[2], init.spins[i][2]);
                let b: f64 = (0..6).map(|j| h.couplings().get(2, i, j) * init.spins[j][2]).sum();
                let (sn, c) = (2.0 * b * t).sin_cos();
                let x = init.spins[i][0] * c - init.spins[i][1] * sn;
                worst = worst.max((s[i][0] - x).abs());
            }
        });
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn initial_collective_values() {
        let h = ham(5, 3.0, [0.5, 1.0, 0.25]);
        let spec = EnsembleSpec {
            trajectories: 200,
            seed: 1,
            dt: DEFAULT_DT,
        };
        let r = run_ensemble(&h, &spec, &[0.0, 0.1], DtwaObservables::default()).unwrap();
        assert_eq!(r.series.sx[0], 5.0);
        assert!(r.series.dsx[0].abs() <= 1e-12 + 4.0 * r.series.stderr_dsx.as_ref().unwrap()[0]);
    }

    #[test]
    fn deterministic_and_conservative() {
        let h = ham(6, 0.0, [0.5, 1.0, 0.25]);
        let spec = EnsembleSpec {
            trajectories: 100,
            seed: 9,
            dt: DEFAULT_DT,
        };
        let grid: Vec<f64> = (0..=15).map(|k| k as f64 * 0.2).collect();
        let obs = DtwaObservables {
            one_point: true,
            two_point: true,
        };
        let a = run_ensemble(&h, &spec, &grid, obs).unwrap();
        let b = run_ensemble(&h, &spec, &grid, obs).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.two_point, b.two_point);
        assert!(a.max_norm_drift <= NORM_TOLERANCE);
        assert_eq!(a.two_point[0].len(), 15);
    }

    #[test]
    fn stderr_shrinks_with_more_trajectories() {
        let h = ham(6, 3.0, [0.0, 0.0, 1.0]);
        let grid = [0.0, 1.0];
        let run = |n| {
            let spec = EnsembleSpec {
                trajectories: n,
                seed: 4,
                dt: DEFAULT_DT,
            };
            run_ensemble(&h, &spec, &grid, DtwaObservables::default())
                .unwrap()
                .series
                .stderr_sx
                .unwrap()[1]
        };
        let ratio = run(4000) / run(2000);
        assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn rejects_bad_input() {
        let h = ham(3, 0.0, [0.0, 0.0, 1.0]);
        let spec = EnsembleSpec::default();
        assert!(run_ensemble(&h, &spec, &[0.5, 1.0], DtwaObservables::default()).is_err());
        let zero = EnsembleSpec {
            trajectories: 0,
            ..spec
        };
        assert!(run_ensemble(&h, &zero, &[0.0], DtwaObservables::default()).is_err());
    }

    #[test]
    fn pair_indexing() {
        let n = 5;
        let mut p = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                assert_eq!(pair_index(n, i, j), p);
                p += 1;
            }
        }
    }
}
