//! One function per backend, each producing an [`ObservableSeries`] on a
//! shared grid from a shared coupling realization.
//!
//! Conservation diagnostics are recorded in the series metadata:
//! `energy_drift` (all but the oracle), `norm_drift` and `orthonormality`
//! (mlmctdh), `norm_drift` (dtwa, per-trajectory `| |s|² - 3 |`).

use std::sync::Arc;

use spindyn_core::dtwa::{run_ensemble, ClassicalHamiltonian, DtwaObservables, EnsembleSpec};
use spindyn_core::ed::{for_each_snapshot, prepare_x_polarized, reduced_density, von_neumann_entropy, KrylovOptions};
use spindyn_core::hamiltonian::{heisenberg_terms, CompiledOperator};
use spindyn_core::lattice::{build_couplings, sample_disorder, CouplingMatrix};
use spindyn_core::mlmctdh::{
    all_natural_populations, build_initial_state, collective_x, entanglement_entropy, expectation, parse_tree,
    plaquette_order, PropagationOptions, Propagator, SumOfProducts, TreeTopology,
};
use spindyn_core::observables::{ObservableSeries, SeriesMeta};
use spindyn_core::oracle::IsingCase;

use crate::config::{Backend, GeometryKind, ModelKind, RunConfig, SiteOrder};
use crate::error::HarnessError;

/// Couplings of realization `r` (clean models ignore `r`).
pub fn couplings_for(cfg: &RunConfig, r: usize) -> Result<CouplingMatrix, HarnessError> {
    let lat = cfg.lattice()?;
    let made = match cfg.model.kind {
        ModelKind::DisorderedIsing => {
            sample_disorder(&lat, cfg.model.alpha, cfg.disorder().base_seed.wrapping_add(r as u64))
        }
        _ => build_couplings(&lat, cfg.model.alpha, cfg.couplings(), cfg.coupling_mode()),
    };
    made.map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn run_backend(
    backend: Backend,
    cfg: &RunConfig,
    couplings: &CouplingMatrix,
    grid: &[f64],
) -> Result<ObservableSeries, HarnessError> {
    let series = match backend {
        Backend::Ed => run_ed(cfg, couplings, grid),
        Backend::Oracle => run_oracle(couplings, grid),
        Backend::Dtwa => run_dtwa(cfg, couplings, grid),
        Backend::Mlmctdh => run_mlmctdh(cfg, couplings, grid),
    }?;
    Ok(series)
}

fn base_meta(backend: Backend, couplings: &CouplingMatrix) -> SeriesMeta {
    let mut meta = SeriesMeta::new(backend.name(), couplings.site_count());
    meta.couplings = couplings.fingerprint();
    meta.seeds = couplings.seed().into_iter().collect();
    meta
}

pub fn run_oracle(couplings: &CouplingMatrix, grid: &[f64]) -> Result<ObservableSeries, HarnessError> {
    let case = IsingCase::new(couplings.clone()).map_err(HarnessError::numerical("oracle"))?;
    Ok(case.collective_series(grid))
}

pub fn run_ed(cfg: &RunConfig, couplings: &CouplingMatrix, grid: &[f64]) -> Result<ObservableSeries, HarnessError> {
    let fail = HarnessError::numerical;
    let l = couplings.site_count();
    let terms = heisenberg_terms(couplings);
    let op = CompiledOperator::new(&terms);
    let block = if cfg.run.entropy {
        Some(cfg.entropy_block()?)
    } else {
        None
    };
    let opts = KrylovOptions {
        max_sites: cfg.ed().max_sites,
        ..KrylovOptions::default()
    };
    let psi0 = prepare_x_polarized(l).map_err(fail("ed"))?;
    let e0 = op.expectation(psi0.amplitudes());
    let mut series = ObservableSeries::new(grid.to_vec(), base_meta(Backend::Ed, couplings));
    let mut svn = Vec::with_capacity(grid.len());
    let mut drift: f64 = 0.0;
    for_each_snapshot(&psi0, &terms, grid, opts, |k, psi| {
        let (sx, dsx) = psi.collective_x();
        series.sx[k] = sx;
        series.dsx[k] = dsx;
        drift = drift.max((op.expectation(psi.amplitudes()) - e0).abs());
        if let Some(block) = &block {
            svn.push(von_neumann_entropy(&reduced_density(psi, block)?));
        }
        Ok(())
    })
    .map_err(fail("ed"))?;
    if block.is_some() {
        series.svn = Some(svn);
    }
    series.meta = series.meta.with("energy_drift", drift);
    Ok(series)
}

pub fn run_dtwa(cfg: &RunConfig, couplings: &CouplingMatrix, grid: &[f64]) -> Result<ObservableSeries, HarnessError> {
    let d = cfg.dtwa();
    let spec = EnsembleSpec {
        trajectories: d.trajectories,
        seed: d.seed,
        dt: d.dt,
    };
    let h = ClassicalHamiltonian::new(couplings.clone());
    let res = run_ensemble(&h, &spec, grid, DtwaObservables::default()).map_err(HarnessError::numerical("dtwa"))?;
    let mut series = res.series;
    series.meta.couplings = couplings.fingerprint();
    series.meta.seeds = couplings.seed().into_iter().collect();
    series.meta = series
        .meta
        .with("norm_drift", res.max_norm_drift)
        .with("energy_drift", res.max_energy_drift);
    Ok(series)
}

/// The tree of the config, with the configured site order applied.
pub fn topology(cfg: &RunConfig, tree: &str) -> Result<TreeTopology, HarnessError> {
    let topo = parse_tree(tree).map_err(|e| HarnessError::Config(e.to_string()))?;
    let order = cfg
        .mlmctdh
        .as_ref()
        .and_then(|m| m.site_order)
        .unwrap_or(match cfg.lattice.geometry {
            GeometryKind::Square => SiteOrder::Plaquette,
            GeometryKind::Chain => SiteOrder::Linear,
        });
    match (order, cfg.lattice.lx, cfg.lattice.ly) {
        (SiteOrder::Plaquette, Some(lx), Some(ly)) => {
            let order = plaquette_order(lx, ly).map_err(|e| HarnessError::Config(e.to_string()))?;
            topo.with_site_order(order)
                .map_err(|e| HarnessError::Config(e.to_string()))
        }
        _ => Ok(topo),
    }
}

pub fn run_mlmctdh(
    cfg: &RunConfig,
    couplings: &CouplingMatrix,
    grid: &[f64],
) -> Result<ObservableSeries, HarnessError> {
    let ml = cfg
        .mlmctdh
        .as_ref()
        .ok_or_else(|| HarnessError::Config("missing [mlmctdh] section".into()))?;
    run_mlmctdh_tree(cfg, &ml.tree, couplings, grid)
}

/// As [`run_mlmctdh`] with the tree given explicitly (used by convergence scans).
pub fn run_mlmctdh_tree(
    cfg: &RunConfig,
    tree: &str,
    couplings: &CouplingMatrix,
    grid: &[f64],
) -> Result<ObservableSeries, HarnessError> {
    let fail = HarnessError::numerical;
    let ml = cfg
        .mlmctdh
        .clone()
        .unwrap_or_else(|| crate::config::MlmctdhSection::new(tree));
    let topo = Arc::new(topology(cfg, tree)?);
    let block_node = if cfg.run.entropy {
        Some(
            topo.find_block(&cfg.entropy_block()?)
                .map_err(|e| HarnessError::Config(format!("entropy block: {e}")))?,
        )
    } else {
        None
    };
    let terms = heisenberg_terms(couplings);
    let sop = SumOfProducts::from_terms(&terms);
    let opts = PropagationOptions {
        rtol: ml.rtol,
        atol: ml.atol,
        regularization: ml.regularization,
        ..PropagationOptions::default()
    };
    let mut prop = Propagator::new(topo.clone(), &sop, opts).map_err(fail("mlmctdh"))?;
    let mut state = build_initial_state(topo.clone());
    let e0 = expectation(&state, &sop).map_err(fail("mlmctdh"))?;
    let top: Vec<usize> = topo.node(topo.root()).children.clone();
    let tail = ml.natpop_tail;

    let mut meta = base_meta(Backend::Mlmctdh, couplings).with("tree", tree);
    meta = meta.with("rtol", ml.rtol).with("regularization", ml.regularization);
    let mut series = ObservableSeries::new(grid.to_vec(), meta);
    let mut svn = Vec::with_capacity(grid.len());
    let mut natpop = vec![vec![0.0; grid.len()]; tail];
    let (mut e_drift, mut n_drift, mut ortho) = (0.0f64, 0.0f64, 0.0f64);
    prop.propagate(&mut state, grid, |k, s| {
        let (sx, dsx) = collective_x(s)?;
        series.sx[k] = sx;
        series.dsx[k] = dsx;
        if let Some(node) = block_node {
            svn.push(entanglement_entropy(s, node)?);
        }
        if tail > 0 {
            let spectra = all_natural_populations(s);
            for (j, col) in natpop.iter_mut().enumerate() {
                // j-th least dominant population, worst case over the top layer.
                col[k] = top
                    .iter()
                    .filter_map(|&c| {
                        let p = &spectra[c].populations;
                        p.len().checked_sub(j + 1).map(|i| p[i].max(0.0))
                    })
                    .fold(0.0, f64::max);
            }
        }
        e_drift = e_drift.max((expectation(s, &sop)? - e0).abs());
        n_drift = n_drift.max((s.norm() - 1.0).abs());
        ortho = ortho.max(s.max_orthonormality_residual());
        Ok(())
    })
    .map_err(fail("mlmctdh"))?;
    if block_node.is_some() {
        series.svn = Some(svn);
    }
    series.natpop_tail = natpop;
    let stats = prop.stats();
    series.meta = series
        .meta
        .with("energy_drift", e_drift)
        .with("norm_drift", n_drift)
        .with("orthonormality", ortho)
        .with("accepted_steps", stats.accepted)
        .with("rejected_steps", stats.rejected);
    Ok(series)
}
