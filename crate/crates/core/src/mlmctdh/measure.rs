//! Observables evaluated by exact contraction through the tree.

use nalgebra::DMatrix;

use crate::ed::{entropy_of_spectrum, hermitian_eigenvalues};
use crate::error::{Error, Result};
use crate::mlmctdh::operator::{leaf_pauli, SopPlan, SumOfProducts};
use crate::mlmctdh::state::TreeState;
use crate::mlmctdh::sweep::{densities, upward, View};
use crate::mlmctdh::tensor::{apply_axis, hole};
use crate::C64;

/// Eigenvalues of a node's hole density, normalized to unit trace, descending.
#[derive(Clone, Debug, PartialEq)]
pub struct NaturalSpectrum {
    pub node: usize,
    pub populations: Vec<f64>,
}

impl NaturalSpectrum {
    /// Least dominant population.
    pub fn smallest(&self) -> f64 {
        *self.populations.last().unwrap()
    }
}

fn view(state: &TreeState) -> View<'_> {
    View {
        topo: state.topology(),
        offsets: state.offsets(),
        data: state.coefficients(),
    }
}

/// `⟨Ψ|O|Ψ⟩` for a sum-of-products operator.
pub fn expectation(state: &TreeState, op: &SumOfProducts) -> Result<f64> {
    let plan = SopPlan::new(state.topology(), op)?;
    let up = upward(view(state), &plan, false);
    Ok(up.hin[0][(0, 0)].re + plan.constant * state.norm().powi(2))
}

/// `⟨σ^a_i⟩` for every lattice site `i`.
pub fn one_point(state: &TreeState, axis: usize) -> Vec<f64> {
    let topo = state.topology();
    let rho = densities(view(state));
    let mut out = vec![0.0; topo.site_count()];
    for &leaf in topo.leaves() {
        let sites = &topo.node(leaf).sites;
        let dims = topo.tensor_dims(leaf);
        let a = state.tensor(leaf);
        for (bit, &site) in sites.iter().enumerate() {
            let b = apply_axis(a, &dims, 1, &leaf_pauli(sites.len(), bit, axis));
            let h = hole(a, &b, &dims, 0);
            out[site] = h.zip_map(&rho[leaf], |x, y| x * y).sum().re;
        }
    }
    out
}

/// `⟨σ^{ai}_i σ^{aj}_j⟩` for distinct sites.
pub fn pair_expectation(state: &TreeState, i: usize, ai: usize, j: usize, aj: usize) -> Result<f64> {
    let mut op = SumOfProducts::zero(state.topology().site_count());
    op.add_pair(i, ai, j, aj, 1.0)?;
    expectation(state, &op)
}

/// `(⟨S_x⟩, ⟨S_x²⟩ - ⟨S_x⟩²)`.
pub fn collective_x(state: &TreeState) -> Result<(f64, f64)> {
    let l = state.topology().site_count();
    let sx: f64 = one_point(state, 0).iter().sum();
    let sx2 = expectation(state, &SumOfProducts::collective_x_squared(l))?;
    Ok((sx, sx2 - sx * sx))
}

/// Hole densities of all nodes (root `[[1]]`).
pub fn hole_densities(state: &TreeState) -> Vec<DMatrix<C64>> {
    densities(view(state))
}

fn spectrum_of(node: usize, rho: &DMatrix<C64>) -> NaturalSpectrum {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let mut ev = hermitian_eigenvalues(&herm);
    let trace: f64 = ev.iter().sum();
    ev.iter_mut().for_each(|x| *x /= trace);
    NaturalSpectrum { node, populations: ev }
}

pub fn natural_populations(state: &TreeState, node: usize) -> Result<NaturalSpectrum> {
    let topo = state.topology();
    if node == topo.root() || node >= topo.len() {
        return Err(Error::Invalid(format!(
            "natural populations need a non-root node, got {node}"
        )));
    }
    Ok(spectrum_of(node, &hole_densities(state)[node]))
}

/// Spectra of every non-root node, indexed by node id (entry 0 is empty).
pub fn all_natural_populations(state: &TreeState) -> Vec<NaturalSpectrum> {
    let rho = hole_densities(state);
    let mut out = vec![NaturalSpectrum {
        node: 0,
        populations: vec![1.0],
    }];
    out.extend((1..rho.len()).map(|id| spectrum_of(id, &rho[id])));
    out
}

/// Von Neumann entropy (natural log) between a node's sites and the rest.
pub fn entanglement_entropy(state: &TreeState, node: usize) -> Result<f64> {
    Ok(entropy_of_spectrum(&natural_populations(state, node)?.populations))
}

/// Entropy of the block `sites`, which must coincide with a node of the tree.
pub fn block_entropy(state: &TreeState, sites: &[usize]) -> Result<f64> {
    let node = state.topology().find_block(sites)?;
    entanglement_entropy(state, node)
}
