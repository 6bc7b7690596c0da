//! Figure-panel presets `fig2a` … `fig6f`.
//!
//! Panels `a`–`c` and `d`–`f` of a figure share their runs (same model at
//! α = 0, 3, 6, or the three lattices of figure 6); the panel id only selects
//! which column the figure plots.

use std::path::PathBuf;

use crate::config::{
    Backend, DisorderSection, DtwaSection, GeometryKind, LatticeSection, MlmctdhSection, ModelKind, ModelSection,
    RangeKind, RunConfig, RunSection, TimeSection,
};

const XYZ: [f64; 3] = [0.5, 1.0, 0.25];
const ALPHAS: [f64; 3] = [0.0, 3.0, 6.0];

#[derive(Clone, Debug)]
pub struct Preset {
    pub id: String,
    pub description: String,
    /// Column plotted by the panel.
    pub column: &'static str,
    pub config: RunConfig,
}

fn chain(len: usize) -> LatticeSection {
    LatticeSection {
        geometry: GeometryKind::Chain,
        length: Some(len),
        lx: None,
        ly: None,
    }
}

fn square(lx: usize, ly: usize) -> LatticeSection {
    LatticeSection {
        geometry: GeometryKind::Square,
        length: None,
        lx: Some(lx),
        ly: Some(ly),
    }
}

fn config(
    id: &str,
    lattice: LatticeSection,
    model: ModelSection,
    backends: &[Backend],
    tree: &str,
    entropy: bool,
) -> RunConfig {
    RunConfig {
        lattice,
        model,
        time: TimeSection::default(),
        run: RunSection {
            backends: backends.to_vec(),
            output: PathBuf::from("out").join(id),
            entropy,
        },
        mlmctdh: Some(MlmctdhSection::new(tree)),
        dtwa: backends.contains(&Backend::Dtwa).then(DtwaSection::default),
        ed: None,
        disorder: None,
    }
}

fn model(kind: ModelKind, alpha: f64, couplings: Option<[f64; 3]>, range: RangeKind) -> ModelSection {
    ModelSection {
        kind,
        alpha,
        couplings,
        range,
    }
}

/// Column plotted by panel letter `p` of a two-row figure.
fn row_column(p: usize, top: &'static str, bottom: &'static str) -> &'static str {
    if p < 3 {
        top
    } else {
        bottom
    }
}

fn build(fig: usize, p: usize) -> Preset {
    use Backend::*;
    let letter = (b'a' + p as u8) as char;
    let id = format!("fig{fig}{letter}");
    let col = p % 3;
    let alpha = ALPHAS[col];
    let (description, column, cfg) = match fig {
        2 => (
            format!("Ising chain L=32, alpha={alpha}"),
            row_column(p, "Sx", "dSx"),
            config(
                &id,
                chain(32),
                model(ModelKind::Ising, alpha, None, RangeKind::PowerLaw),
                &[Mlmctdh, Dtwa, Oracle],
                "32→[2]16→[4]4→[12]1",
                true,
            ),
        ),
        3 | 4 => {
            let m = if col == 0 { 22 } else { 16 };
            let tree = format!("32→[2]16→[4]4→[{m}]1");
            let (what, column, backends): (&str, &'static str, &[Backend]) = if fig == 3 {
                ("", row_column(p, "Sx", "dSx"), &[Mlmctdh, Dtwa, Oracle])
            } else {
                (
                    ", natural populations and entropy",
                    row_column(p, "natpop_tail_0", "SvN"),
                    &[Mlmctdh],
                )
            };
            let mut cfg = config(
                &id,
                chain(32),
                model(ModelKind::DisorderedIsing, alpha, None, RangeKind::PowerLaw),
                backends,
                &tree,
                true,
            );
            cfg.disorder = Some(DisorderSection::default());
            (
                format!("disordered Ising chain L=32, alpha={alpha}, 100 realizations{what}"),
                column,
                cfg,
            )
        }
        5 => {
            let m = if col == 0 { 10 } else { 12 };
            (
                format!("XYZ chain L=16, J=(0.5, 1.0, 0.25), alpha={alpha}"),
                row_column(p, "Sx", "dSx"),
                config(
                    &id,
                    chain(16),
                    model(ModelKind::Xyz, alpha, Some(XYZ), RangeKind::PowerLaw),
                    &[Mlmctdh, Dtwa, Ed],
                    &format!("16→[2]4→[{m}]1"),
                    true,
                ),
            )
        }
        6 => {
            let column = row_column(p, "Sx", "dSx");
            let nn = RangeKind::NearestNeighbor;
            match col {
                0 => (
                    "nearest-neighbour Ising chain L=128".to_string(),
                    column,
                    config(
                        &id,
                        chain(128),
                        model(ModelKind::Ising, 0.0, None, nn),
                        &[Mlmctdh, Dtwa, Oracle],
                        "128→[2]64→[4]16→[10]4→[18]1",
                        false,
                    ),
                ),
                1 => (
                    "nearest-neighbour Ising on a 4x4 square lattice".to_string(),
                    column,
                    config(
                        &id,
                        square(4, 4),
                        model(ModelKind::Ising, 0.0, None, nn),
                        &[Mlmctdh, Dtwa, Oracle],
                        "16→[2]4→[8]1",
                        false,
                    ),
                ),
                _ => (
                    "nearest-neighbour XYZ on a 4x4 square lattice, J=(0.5, 1.0, 0.25)".to_string(),
                    column,
                    config(
                        &id,
                        square(4, 4),
                        model(ModelKind::Xyz, 0.0, Some(XYZ), nn),
                        &[Mlmctdh, Dtwa, Ed],
                        "16→[2]4→[14]1",
                        false,
                    ),
                ),
            }
        }
        _ => unreachable!("figures 2-6 only"),
    };
    Preset {
        id,
        description,
        column,
        config: cfg,
    }
}

pub fn all() -> Vec<Preset> {
    (2..=6).flat_map(|f| (0..6).map(move |p| build(f, p))).collect()
}

pub fn find(id: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        let presets = all();
        assert_eq!(presets.len(), 30);
        for p in &presets {
            p.config.validate().unwrap_or_else(|e| panic!("{}: {e}", p.id));
            let back = RunConfig::from_toml(&p.config.to_toml()).unwrap();
            assert_eq!(back, p.config, "{}", p.id);
        }
        assert!(find("fig2a").is_some());
        assert!(find("fig7a").is_none());
    }

    #[test]
    fn panel_parameters() {
        let p = find("fig2a").unwrap().config;
        assert_eq!(p.sites().unwrap(), 32);
        assert_eq!(p.mlmctdh.unwrap().tree, "32→[2]16→[4]4→[12]1");
        assert_eq!(p.dtwa.unwrap().trajectories, 10_000);
        let d = find("fig3d").unwrap();
        assert_eq!(d.column, "dSx");
        assert_eq!(d.config.model.alpha, 0.0);
        assert_eq!(d.config.realizations(), 100);
        assert!(d.config.mlmctdh.unwrap().tree.contains("[22]"));
        let x = find("fig5b").unwrap().config;
        assert_eq!(x.couplings(), [0.5, 1.0, 0.25]);
        assert_eq!(x.mlmctdh.unwrap().tree, "16→[2]4→[12]1");
        assert_eq!(find("fig5a").unwrap().config.mlmctdh.unwrap().tree, "16→[2]4→[10]1");
        assert_eq!(find("fig6c").unwrap().config.mlmctdh.unwrap().tree, "16→[2]4→[14]1");
        assert_eq!(find("fig6e").unwrap().config.mlmctdh.unwrap().tree, "16→[2]4→[8]1");
    }
}
