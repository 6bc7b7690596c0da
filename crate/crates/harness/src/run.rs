//! Orchestration: running configs, convergence scans and comparisons.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use spindyn_core::observables::{ensemble_average, max_deviation, ObservableSeries};

use crate::backends::{couplings_for, run_backend, run_mlmctdh_tree};
use crate::config::{Backend, RunConfig};
use crate::error::HarnessError;

/// Worker count from `SPINDYN_WORKERS` (unset: rayon's default).
pub const WORKERS_ENV: &str = "SPINDYN_WORKERS";

/// Sizes the global worker pool once; later calls are no-ops.
pub fn init_workers() -> Result<(), HarnessError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HarnessError::Config(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    // Fails only if a pool already exists, which is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Largest pointwise deviation between two backends for one column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Deviation {
    pub a: String,
    pub b: String,
    pub column: String,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub sites: usize,
    pub grid_points: usize,
    pub realizations: usize,
    pub files: BTreeMap<String, String>,
    pub deviations: Vec<Deviation>,
    /// Backend → metadata diagnostics (`energy_drift`, ...).
    pub diagnostics: BTreeMap<String, BTreeMap<String, String>>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub series: BTreeMap<Backend, ObservableSeries>,
    pub summary: Summary,
}

const COMPARED: [&str; 3] = ["Sx", "dSx", "SvN"];

/// Pairwise max deviations over the columns both series carry.
pub fn deviations(named: &[(String, &ObservableSeries)]) -> Result<Vec<Deviation>, HarnessError> {
    let mut out = Vec::new();
    for (i, (na, a)) in named.iter().enumerate() {
        for (nb, b) in &named[i + 1..] {
            for col in COMPARED {
                if a.column(col).is_none() || b.column(col).is_none() {
                    continue;
                }
                let max = max_deviation(a, b, col).map_err(|e| HarnessError::Config(e.to_string()))?;
                out.push(Deviation {
                    a: na.clone(),
                    b: nb.clone(),
                    column: col.to_string(),
                    max,
                });
            }
        }
    }
    Ok(out)
}

/// Runs every backend (and realization) of `cfg` without writing files.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let grid = cfg.time_grid();
    let r = cfg.realizations();
    let couplings = (0..r).map(|k| couplings_for(cfg, k)).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, Backend)> = (0..r)
        .flat_map(|k| cfg.run.backends.iter().map(move |&b| (k, b)))
        .collect();
    let results: Vec<ObservableSeries> = jobs
        .par_iter()
        .map(|&(k, b)| run_backend(b, cfg, &couplings[k], &grid))
        .collect::<Result<_, _>>()?;

    let mut series = BTreeMap::new();
    for (i, &b) in cfg.run.backends.iter().enumerate() {
        let runs: Vec<ObservableSeries> = (0..r)
            .map(|k| results[k * cfg.run.backends.len() + i].clone())
            .collect();
        let merged = if r == 1 {
            runs.into_iter().next().unwrap()
        } else {
            let mut mean = ensemble_average(&runs).map_err(HarnessError::numerical(b))?;
            // Worst diagnostic over realizations.
            for (key, value) in mean.meta.extra.iter_mut() {
                let worst = runs
                    .iter()
                    .filter_map(|s| s.meta.get(key).and_then(|v| v.parse::<f64>().ok()))
                    .fold(f64::NAN, f64::max);
                if key.ends_with("drift") || key == "orthonormality" {
                    *value = worst.to_string();
                }
            }
            mean.meta.couplings = format!("ensemble of {r}");
            mean
        };
        series.insert(b, merged);
    }

    let named: Vec<(String, &ObservableSeries)> = series.iter().map(|(b, s)| (b.to_string(), s)).collect();
    let deviations = deviations(&named)?;
    let diagnostics = series
        .iter()
        .map(|(b, s)| {
            let d = s
                .meta
                .extra
                .iter()
                .filter(|(k, _)| k.ends_with("drift") || k == "orthonormality")
                .cloned()
                .collect();
            (b.to_string(), d)
        })
        .collect();
    let files = series.keys().map(|b| (b.to_string(), format!("{b}.csv"))).collect();
    Ok(RunOutput {
        summary: Summary {
            sites: cfg.sites()?,
            grid_points: grid.len(),
            realizations: r,
            files,
            deviations,
            diagnostics,
        },
        series,
    })
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn csv_bytes(series: &ObservableSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).expect("writing to memory");
    buf
}

/// Runs `cfg` and writes `<output>/<backend>.csv` and `<output>/summary.json`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    let out = execute(cfg)?;
    let dir = &cfg.run.output;
    for (b, s) in &out.series {
        write_atomic(&dir.join(format!("{b}.csv")), &csv_bytes(s))?;
    }
    let json = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    write_atomic(&dir.join("summary.json"), json.as_bytes())?;
    Ok(out)
}

/// `spec` with the SPF count of its top layer (the last bracket) set to `m`.
pub fn with_top_spf(spec: &str, m: usize) -> Result<String, HarnessError> {
    let open = spec
        .rfind('[')
        .ok_or_else(|| HarnessError::Config(format!("tree {spec:?} has no SPF counts")))?;
    let close = spec[open..]
        .find(']')
        .map(|i| open + i)
        .ok_or_else(|| HarnessError::Config(format!("tree {spec:?}: unbalanced bracket")))?;
    Ok(format!("{}[{m}{}", &spec[..open], &spec[close..]))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub tree: String,
    pub max_dev_sx: f64,
    pub max_dev_dsx: f64,
    /// Deviation larger than at the previous (smaller) `m`.
    pub non_monotone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub reference: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn monotone(&self) -> bool {
        !self.rows.iter().any(|r| r.non_monotone)
    }
}

/// Reruns the mlmctdh backend with the top-layer SPF count set to each of
/// `m_values` (ascending) and compares `⟨S_x⟩`, `ΔS_x` with the reference
/// backend (ed when it fits, otherwise the Ising oracle). Uses realization 0.
pub fn converge(cfg: &RunConfig, m_values: &[usize]) -> Result<ConvergenceReport, HarnessError> {
    cfg.validate()?;
    let ml = cfg
        .mlmctdh
        .as_ref()
        .ok_or_else(|| HarnessError::Config("converge needs an [mlmctdh] section".into()))?;
    if m_values.is_empty() || m_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Config("--m values must be strictly ascending".into()));
    }
    let reference = if cfg.sites()? <= cfg.ed().max_sites {
        Backend::Ed
    } else if cfg.is_ising() {
        Backend::Oracle
    } else {
        return Err(HarnessError::Config(
            "no reference backend: lattice too large for ed and not Ising".into(),
        ));
    };
    let grid = cfg.time_grid();
    let couplings = couplings_for(cfg, 0)?;
    let reference_series = run_backend(reference, cfg, &couplings, &grid)?;
    let trees = m_values
        .iter()
        .map(|&m| {
            let t = with_top_spf(&ml.tree, m)?;
            crate::backends::topology(cfg, &t)?;
            Ok(t)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let runs: Vec<ObservableSeries> = trees
        .par_iter()
        .map(|t| run_mlmctdh_tree(cfg, t, &couplings, &grid))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for ((&m, tree), s) in m_values.iter().zip(trees).zip(&runs) {
        let dev = |c| max_deviation(s, &reference_series, c).map_err(HarnessError::numerical("mlmctdh"));
        let (sx, dsx) = (dev("Sx")?, dev("dSx")?);
        let non_monotone = rows.last().is_some_and(|p| sx > p.max_dev_sx);
        rows.push(ConvergenceRow {
            m,
            tree,
            max_dev_sx: sx,
            max_dev_dsx: dsx,
            non_monotone,
        });
    }
    Ok(ConvergenceReport {
        reference: reference.to_string(),
        rows,
    })
}

/// Reads CSVs written by [`run`] and returns their pairwise deviations.
pub fn compare(paths: &[PathBuf]) -> Result<Vec<Deviation>, HarnessError> {
    if paths.len() < 2 {
        return Err(HarnessError::Config("compare needs at least two CSV files".into()));
    }
    let series = paths
        .iter()
        .map(|p| {
            let f = fs::File::open(p).map_err(|source| HarnessError::Io {
                path: p.display().to_string(),
                source,
            })?;
            ObservableSeries::read_csv(std::io::BufReader::new(f))
                .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let named: Vec<(String, &ObservableSeries)> = paths.iter().map(|p| p.display().to_string()).zip(&series).collect();
    deviations(&named)
}

pub fn format_deviations(devs: &[Deviation]) -> String {
    let mut out = format!("{:<28} {:<28} {:<5} {:>14}\n", "a", "b", "col", "max |a-b|");
    for d in devs {
        out += &format!("{:<28} {:<28} {:<5} {:>14.6e}\n", d.a, d.b, d.column, d.max);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_spf_substitution() {
        assert_eq!(with_top_spf("12→[2]6→[4]3→[8]1", 2).unwrap(), "12→[2]6→[4]3→[2]1");
        assert_eq!(with_top_spf("8->[2]4->[16]1", 3).unwrap(), "8->[2]4->[3]1");
        assert!(with_top_spf("8", 3).is_err());
    }
}
