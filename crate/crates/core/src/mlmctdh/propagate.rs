//! Variational equations of motion and their adaptive integration.
//!
//! Root: `i Ȧ = H_loc A`. Other nodes (standard gauge, no constraint operator):
//! `i Ȧ = (1 - P) [H_loc A + Σ_g ρ̃⁻¹ N(g) σ_g A]`, where `P` projects onto the
//! node's current SPFs and `ρ̃⁻¹` is the regularized inverse hole density.
//! Nodes whose SPFs already span their full subspace have `1 - P = 0` and stay
//! fixed.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonian::TermList;
use crate::mlmctdh::operator::{SopPlan, SumOfProducts};
use crate::mlmctdh::state::TreeState;
use crate::mlmctdh::sweep::{axis_operator, downward, upward, View};
use crate::mlmctdh::tensor::{apply_axis, apply_axis_add, hole, orthonormality_residual, orthonormalize_rows};
use crate::mlmctdh::topology::TreeTopology;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions {
    pub rtol: f64,
    pub atol: f64,
    /// `ε` in `λ → λ + ε exp(-λ/ε)` for the hole-density eigenvalues.
    pub regularization: f64,
    /// Abort if any node's orthonormality residual exceeds this at an output time.
    pub orthonormality_limit: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            rtol: 1e-8,
            atol: 1e-10,
            regularization: 1e-8,
            orthonormality_limit: 1e-6,
            initial_step: None,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropagationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    /// Right-hand-side evaluations in which some natural population fell below `ε`.
    pub saturated_evaluations: usize,
}

pub struct Propagator {
    topo: Arc<TreeTopology>,
    plan: SopPlan,
    opts: PropagationOptions,
    evolving: Vec<bool>,
    wanted: Vec<bool>,
    stats: PropagationStats,
}

fn regularized_inverse(rho: &DMatrix<C64>, eps: f64) -> (DMatrix<C64>, f64) {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let trace: f64 = eig.eigenvalues.iter().sum();
    let smallest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let inv: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&l| C64::new(1.0 / (l + eps * (-l / eps).exp()), 0.0))
        .collect();
    let u = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |r, c| u[(r, c)] * inv[c]);
    (scaled * u.adjoint(), smallest / trace.max(f64::MIN_POSITIVE))
}

// Dormand-Prince 5(4) tableau (the equations are autonomous, so nodes `c` are unused).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Propagator {
    pub fn new(topology: Arc<TreeTopology>, hamiltonian: &SumOfProducts, opts: PropagationOptions) -> Result<Self> {
        let plan = SopPlan::new(&topology, hamiltonian)?;
        let n = topology.len();
        let evolving: Vec<bool> = (0..n).map(|id| !topology.is_full_rank(id)).collect();
        let mut wanted = vec![false; n];
        for id in (1..n).rev() {
            let below = topology.node(id).children.iter().any(|&c| wanted[c]);
            wanted[id] = evolving[id] || below;
        }
        wanted[0] = true;
        Ok(Propagator {
            topo: topology,
            plan,
            opts,
            evolving,
            wanted,
            stats: PropagationStats::default(),
        })
    }

    pub fn from_terms(topology: Arc<TreeTopology>, terms: &TermList, opts: PropagationOptions) -> Result<Self> {
        Self::new(topology, &SumOfProducts::from_terms(terms), opts)
    }

    #[cfg(test)]
    pub(crate) fn set_pair_strategy(&mut self, strategy: crate::mlmctdh::operator::PairStrategy) {
        self.plan.strategy = strategy;
    }

    pub fn stats(&self) -> &PropagationStats {
        &self.stats
    }

    pub fn options(&self) -> &PropagationOptions {
        &self.opts
    }

    fn check_state(&self, state: &TreeState) -> Result<()> {
        if state.topology() != &*self.topo {
            return Err(Error::TreeSpec(format!(
                "state tree {:?} does not match propagator tree {:?}",
                state.topology().spec(),
                self.topo.spec()
            )));
        }
        Ok(())
    }

    /// Time derivative of all node coefficients at the given state.
    pub fn derivative(&mut self, state: &TreeState) -> Result<Vec<C64>> {
        self.check_state(state)?;
        let mut out = vec![C64::new(0.0, 0.0); state.coefficient_count()];
        let offsets = state.offsets().to_vec();
        self.rhs(&offsets, state.coefficients(), &mut out);
        Ok(out)
    }

    fn rhs(&mut self, offsets: &[usize], y: &[C64], out: &mut [C64]) {
        self.stats.rhs_evaluations += 1;
        let topo = &*self.topo;
        let view = View { topo, offsets, data: y };
        let plan = &self.plan;
        let up = upward(view, plan, true);
        let down = downward(view, plan, &up, &self.wanted);
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        let minus_i = C64::new(0.0, -1.0);
        let mut saturated = false;
        for id in 0..topo.len() {
            let dst = &mut out[offsets[id]..offsets[id + 1]];
            if id == topo.root() {
                for (d, x) in dst.iter_mut().zip(&up.ha[id]) {
                    *d = minus_i * x;
                }
                continue;
            }
            if !self.evolving[id] {
                continue;
            }
            let dims = topo.tensor_dims(id);
            let a = view.tensor(id);
            let rho = down.rho[id].as_ref().expect("evolving node has a hole density");
            let (rinv, smallest) = regularized_inverse(rho, self.opts.regularization);
            saturated |= smallest < self.opts.regularization;
            let mut x = up.ha[id].clone();
            for (i, &g) in plan.needed[id].iter().enumerate() {
                let gmat = &rinv * &down.field[id][i];
                let (axis, sigma) = axis_operator(topo, plan, &up, id, g);
                let b = apply_axis(a, &dims, axis, sigma);
                apply_axis_add(&b, &dims, 0, &gmat, &mut x);
            }
            let m = dims[0];
            let flat = [m, a.len() / m];
            let s = hole(a, &x, &flat, 0).transpose();
            let proj = apply_axis(a, &flat, 0, &s);
            for ((d, xv), pv) in dst.iter_mut().zip(&x).zip(&proj) {
                *d = minus_i * (xv - pv);
            }
        }
        if saturated {
            self.stats.saturated_evaluations += 1;
        }
    }

    // Restores orthonormal SPFs bottom-up, pushing each correction into the parent.
    fn reorthonormalize(&self, offsets: &[usize], y: &mut [C64]) {
        let topo = &*self.topo;
        for id in (1..topo.len()).rev() {
            let m = topo.node(id).spf;
            let r = orthonormalize_rows(&mut y[offsets[id]..offsets[id + 1]], m);
            let p = topo.node(id).parent.unwrap();
            let axis = 1 + topo.node(p).children.iter().position(|&c| c == id).unwrap();
            let pdims = topo.tensor_dims(p);
            let updated = apply_axis(&y[offsets[p]..offsets[p + 1]], &pdims, axis, &r.transpose());
            y[offsets[p]..offsets[p + 1]].copy_from_slice(&updated);
        }
    }

    fn max_residual(&self, offsets: &[usize], y: &[C64]) -> f64 {
        (1..self.topo.len())
            .map(|id| orthonormality_residual(&y[offsets[id]..offsets[id + 1]], self.topo.node(id).spf))
            .fold(0.0, f64::max)
    }

    fn error_norm(&self, y0: &[C64], y1: &[C64], err: &[C64]) -> f64 {
        let mut acc = 0.0;
        for ((a, b), e) in y0.iter().zip(y1).zip(err) {
            let sc = self.opts.atol + self.opts.rtol * a.norm().max(b.norm());
            acc += (e.norm() / sc).powi(2);
        }
        (acc / y0.len() as f64).sqrt()
    }

    /// Integrates `state` through `t_grid` (whose first entry must be the
    /// state's current time), calling `visit(k, state)` at every grid point.
    pub fn propagate<F>(&mut self, state: &mut TreeState, t_grid: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &TreeState) -> Result<()>,
    {
        self.check_state(state)?;
        match t_grid.first() {
            Some(&t0) if (t0 - state.time).abs() <= 1e-12 * t0.abs().max(1.0) => {}
            _ => {
                return Err(Error::TimeGrid(format!(
                    "grid must start at the state time {}",
                    state.time
                )))
            }
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::TimeGrid("grid must be strictly increasing".into()));
        }
        visit(0, state)?;
        if t_grid.len() == 1 {
            return Ok(());
        }
        let offsets = state.offsets().to_vec();
        let n = state.coefficient_count();
        let norm0 = state.norm();
        let mut y = state.coefficients().to_vec();
        let mut t = state.time;
        let zero = C64::new(0.0, 0.0);
        let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; 7];
        let mut ytmp = vec![zero; n];
        let mut ynew = vec![zero; n];
        let mut err = vec![zero; n];
        self.rhs(&offsets, &y, &mut k[0]);

        let mut h = match self.opts.initial_step {
            Some(h) => h,
            None => {
                let scale = |v: &[C64]| {
                    let s: f64 = y
                        .iter()
                        .zip(v)
                        .map(|(a, b)| (b.norm() / (self.opts.atol + self.opts.rtol * a.norm())).powi(2))
                        .sum();
                    (s / n as f64).sqrt()
                };
                let (d0, d1) = (scale(&y), scale(&k[0]));
                if d0 < 1e-5 || d1 < 1e-5 {
                    1e-6
                } else {
                    0.01 * d0 / d1
                }
            }
        };
        let mut steps = 0usize;
        for (idx, &target) in t_grid.iter().enumerate().skip(1) {
            while t < target {
                if steps >= self.opts.max_steps {
                    return Err(Error::StepUnderflow { t, h });
                }
                let remaining = target - t;
                let last = h >= remaining * (1.0 - 1e-12);
                let step = if last { remaining } else { h };
                for s in 1..7 {
                    ytmp.copy_from_slice(&y);
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let c = A[s][j] * step;
                        if c == 0.0 {
                            continue;
                        }
                        for (yt, kv) in ytmp.iter_mut().zip(kj) {
                            *yt += kv * c;
                        }
                    }
                    self.rhs(&offsets, &ytmp, &mut k[s]);
                }
                // The last stage is evaluated at the 5th-order solution.
                ynew.copy_from_slice(&ytmp);
                for (i, e) in err.iter_mut().enumerate() {
                    let mut acc = zero;
                    for (j, kj) in k.iter().enumerate() {
                        acc += kj[i] * E[j];
                    }
                    *e = acc * step;
                }
                let en = self.error_norm(&y, &ynew, &err);
                steps += 1;
                if en <= 1.0 {
                    self.stats.accepted += 1;
                    t = if last { target } else { t + step };
                    y.copy_from_slice(&ynew);
                    if self.max_residual(&offsets, &y) > 1e-13 {
                        self.reorthonormalize(&offsets, &mut y);
                        rescale_root(&offsets, &mut y, norm0);
                        self.rhs(&offsets, &y, &mut k[0]);
                    } else {
                        // The root derivative is linear in the root tensor and the
                        // other nodes' derivatives are invariant under its scaling.
                        let c = rescale_root(&offsets, &mut y, norm0);
                        k[6][..offsets[1]].iter_mut().for_each(|v| *v *= c);
                        k.swap(0, 6);
                    }
                    let fac = if en == 0.0 {
                        5.0
                    } else {
                        (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    let proposal = step * fac;
                    h = if last {
                        proposal.max(h.min(proposal * 5.0))
                    } else {
                        proposal
                    };
                } else {
                    self.stats.rejected += 1;
                    h = step * (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
                    if h < 1e-13 * t.abs().max(1.0) {
                        return Err(Error::StepUnderflow { t, h });
                    }
                }
            }
            state.set_coefficients(y.clone())?;
            state.time = target;
            let residuals = state.orthonormality_residuals();
            if let Some((node, &worst)) = residuals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
                if worst > self.opts.orthonormality_limit {
                    return Err(Error::Orthonormality {
                        node,
                        residual: worst,
                        limit: self.opts.orthonormality_limit,
                        t: target,
                    });
                }
            }
            visit(idx, state)?;
        }
        Ok(())
    }
}

// With orthonormal SPFs the wavefunction norm is the root tensor's norm;
// integration error lets it drift, so it is put back after every step.
fn rescale_root(offsets: &[usize], y: &mut [C64], target: f64) -> f64 {
    let root = &mut y[offsets[0]..offsets[1]];
    let norm = root.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 1.0;
    }
    let c = target / norm;
    root.iter_mut().for_each(|v| *v *= c);
    c
}

/// Propagates a copy of `state` and returns the snapshots on `t_grid`.
pub fn propagate(state: &TreeState, terms: &TermList, t_grid: &[f64]) -> Result<Vec<TreeState>> {
    let mut prop = Propagator::from_terms(state.topology_arc(), terms, PropagationOptions::default())?;
    let mut work = state.clone();
    let mut out = Vec::with_capacity(t_grid.len());
    prop.propagate(&mut work, t_grid, |_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}
