//! Run configurations: a TOML file with one flat section per concern.
//!
//! ```toml
//! [lattice]
//! geometry = "chain"
//! length = 16
//!
//! [model]
//! kind = "xyz"
//! alpha = 3.0
//! couplings = [0.5, 1.0, 0.25]
//!
//! [time]
//! t_max = 3.0
//! t_step = 0.02
//!
//! [run]
//! backends = ["mlmctdh", "ed"]
//! output = "out/xyz16"
//!
//! [mlmctdh]
//! tree = "16→[2]4→[12]1"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spindyn_core::lattice::{build_lattice, CouplingMode, Geometry, LatticeSpec};
use spindyn_core::mlmctdh::parse_tree;

use crate::error::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Mlmctdh,
    Dtwa,
    Ed,
    Oracle,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Mlmctdh => "mlmctdh",
            Backend::Dtwa => "dtwa",
            Backend::Ed => "ed",
            Backend::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlmctdh" => Ok(Backend::Mlmctdh),
            "dtwa" => Ok(Backend::Dtwa),
            "ed" => Ok(Backend::Ed),
            "oracle" => Ok(Backend::Oracle),
            other => Err(HarnessError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ising,
    Xyz,
    DisorderedIsing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Chain,
    Square,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub geometry: GeometryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeKind {
    PowerLaw,
    NearestNeighbor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default)]
    pub alpha: f64,
    /// `[J_x, J_y, J_z]`. Defaults to `[0, 0, 1]` for the Ising models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<[f64; 3]>,
    #[serde(default = "default_range")]
    pub range: RangeKind,
}

fn default_range() -> RangeKind {
    RangeKind::PowerLaw
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_step")]
    pub t_step: f64,
}

fn default_t_max() -> f64 {
    3.0
}

fn default_t_step() -> f64 {
    0.02
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            t_max: default_t_max(),
            t_step: default_t_step(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub backends: Vec<Backend>,
    pub output: PathBuf,
    /// Entropy of the first `L/4` sites (chains) in the `SvN` column.
    #[serde(default = "yes")]
    pub entropy: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteOrder {
    Linear,
    Plaquette,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlmctdhSection {
    pub tree: String,
    /// Defaults to `plaquette` on square lattices and `linear` on chains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_order: Option<SiteOrder>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    /// Number of least-dominant natural populations to report.
    #[serde(default = "default_natpop")]
    pub natpop_tail: usize,
}

fn default_rtol() -> f64 {
    1e-8
}

fn default_atol() -> f64 {
    1e-10
}

fn default_regularization() -> f64 {
    1e-8
}

fn default_natpop() -> usize {
    3
}

impl MlmctdhSection {
    pub fn new(tree: &str) -> Self {
        MlmctdhSection {
            tree: tree.to_string(),
            site_order: None,
            rtol: default_rtol(),
            atol: default_atol(),
            regularization: default_regularization(),
            natpop_tail: default_natpop(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtwaSection {
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_trajectories() -> usize {
    spindyn_core::dtwa::DEFAULT_TRAJECTORIES
}

fn default_dt() -> f64 {
    spindyn_core::dtwa::DEFAULT_DT
}

impl Default for DtwaSection {
    fn default() -> Self {
        DtwaSection {
            trajectories: default_trajectories(),
            dt: default_dt(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdSection {
    #[serde(default = "default_max_sites")]
    pub max_sites: usize,
}

fn default_max_sites() -> usize {
    spindyn_core::ed::DEFAULT_MAX_SITES
}

impl Default for EdSection {
    fn default() -> Self {
        EdSection {
            max_sites: default_max_sites(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_realizations() -> usize {
    100
}

impl Default for DisorderSection {
    fn default() -> Self {
        DisorderSection {
            realizations: default_realizations(),
            base_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSection,
    pub model: ModelSection,
    #[serde(default)]
    pub time: TimeSection,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlmctdh: Option<MlmctdhSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtwa: Option<DtwaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ed: Option<EdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn geometry(&self) -> Result<Geometry, HarnessError> {
        let l = &self.lattice;
        match l.geometry {
            GeometryKind::Chain => match (l.length, l.lx, l.ly) {
                (Some(len), None, None) => Ok(Geometry::Chain { len }),
                _ => Err(HarnessError::Config("a chain takes `length` only".into())),
            },
            GeometryKind::Square => match (l.length, l.lx, l.ly) {
                (None, Some(lx), Some(ly)) => Ok(Geometry::Square { lx, ly }),
                _ => Err(HarnessError::Config("a square lattice takes `lx` and `ly`".into())),
            },
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec, HarnessError> {
        build_lattice(self.geometry()?).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn sites(&self) -> Result<usize, HarnessError> {
        Ok(self.lattice()?.site_count())
    }

    /// `[J_x, J_y, J_z]` after applying the model's defaults.
    pub fn couplings(&self) -> [f64; 3] {
        match (self.model.kind, self.model.couplings) {
            (_, Some(j)) => j,
            _ => [0.0, 0.0, 1.0],
        }
    }

    pub fn coupling_mode(&self) -> CouplingMode {
        match self.model.range {
            RangeKind::PowerLaw => CouplingMode::PowerLaw,
            RangeKind::NearestNeighbor => CouplingMode::NearestNeighbor,
        }
    }

    pub fn is_ising(&self) -> bool {
        let [jx, jy, _] = self.couplings();
        self.model.kind == ModelKind::DisorderedIsing || (jx == 0.0 && jy == 0.0)
    }

    pub fn disorder(&self) -> DisorderSection {
        self.disorder.clone().unwrap_or_default()
    }

    pub fn dtwa(&self) -> DtwaSection {
        self.dtwa.clone().unwrap_or_default()
    }

    pub fn ed(&self) -> EdSection {
        self.ed.clone().unwrap_or_default()
    }

    /// Realizations to run: one for clean models.
    pub fn realizations(&self) -> usize {
        match self.model.kind {
            ModelKind::DisorderedIsing => self.disorder().realizations,
            _ => 1,
        }
    }

    /// `0, t_step, 2 t_step, …` up to and including `t_max`.
    pub fn time_grid(&self) -> Vec<f64> {
        let TimeSection { t_max, t_step } = self.time;
        let n = (t_max / t_step + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * t_step).collect()
    }

    /// Sites of the entropy block: the first quarter of the chain.
    pub fn entropy_block(&self) -> Result<Vec<usize>, HarnessError> {
        let l = self.sites()?;
        if l < 4 {
            return Err(HarnessError::Config(format!("no quarter block on {l} sites")));
        }
        Ok((0..l / 4).collect())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let l = self.sites()?;
        if !self.model.alpha.is_finite() || self.model.alpha < 0.0 {
            return bad(format!(
                "alpha must be a finite non-negative number, got {}",
                self.model.alpha
            ));
        }
        match (self.model.kind, self.model.couplings) {
            (ModelKind::Ising, Some([jx, jy, _])) if jx != 0.0 || jy != 0.0 => {
                return bad("the ising model needs J_x = J_y = 0".into())
            }
            (ModelKind::Xyz, None) => return bad("the xyz model needs `couplings = [J_x, J_y, J_z]`".into()),
            (ModelKind::DisorderedIsing, Some(_)) => {
                return bad("disordered_ising draws its couplings; remove `couplings`".into())
            }
            _ => {}
        }
        if self.model.kind == ModelKind::DisorderedIsing && self.model.range != RangeKind::PowerLaw {
            return bad("disordered_ising supports power-law range only".into());
        }
        let TimeSection { t_max, t_step } = self.time;
        if !(t_step > 0.0 && t_max >= 0.0 && t_step.is_finite() && t_max.is_finite()) {
            return bad(format!(
                "time grid needs t_step > 0 and t_max >= 0, got {t_step} and {t_max}"
            ));
        }
        if self.run.backends.is_empty() {
            return bad("no backends selected".into());
        }
        let mut seen = self.run.backends.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.run.backends.len() {
            return bad("backend listed twice".into());
        }
        for &b in &self.run.backends {
            match b {
                Backend::Oracle if !self.is_ising() => {
                    return bad("the oracle backend covers Ising couplings only (J_x = J_y = 0)".into())
                }
                Backend::Ed if l > self.ed().max_sites => {
                    return bad(format!(
                        "ed is limited to {} sites, lattice has {l}",
                        self.ed().max_sites
                    ))
                }
                Backend::Mlmctdh => {
                    let Some(ml) = &self.mlmctdh else {
                        return bad("mlmctdh backend needs an [mlmctdh] section with `tree`".into());
                    };
                    let topo = parse_tree(&ml.tree).map_err(|e| HarnessError::Config(e.to_string()))?;
                    if topo.site_count() != l {
                        return bad(format!(
                            "tree {} has {} sites, lattice has {l}",
                            ml.tree,
                            topo.site_count()
                        ));
                    }
                    if ml.site_order == Some(SiteOrder::Plaquette) && self.lattice.geometry != GeometryKind::Square {
                        return bad("plaquette site order needs a square lattice".into());
                    }
                    if !(ml.rtol > 0.0 && ml.atol > 0.0 && ml.regularization > 0.0) {
                        return bad("mlmctdh tolerances and regularization must be positive".into());
                    }
                }
                Backend::Dtwa => {
                    let d = self.dtwa();
                    if d.trajectories < 2 || !(d.dt > 0.0) {
                        return bad("dtwa needs at least 2 trajectories and dt > 0".into());
                    }
                }
                _ => {}
            }
        }
        if self.model.kind == ModelKind::DisorderedIsing && self.disorder().realizations == 0 {
            return bad("need at least one disorder realization".into());
        }
        if self.run.entropy {
            self.entropy_block()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const XYZ: &str = r#"
[lattice]
geometry = "chain"
length = 8

[model]
kind = "xyz"
alpha = 3.0
couplings = [0.5, 1.0, 0.25]

[run]
backends = ["ed", "mlmctdh"]
output = "out"

[mlmctdh]
tree = "8->[2]4->[4]2->[16]1"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml(XYZ).unwrap();
        assert_eq!(cfg.sites().unwrap(), 8);
        assert_eq!(cfg.time_grid().len(), 151);
        assert_eq!(cfg.couplings(), [0.5, 1.0, 0.25]);
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_incompatible_backends() {
        let oracle = XYZ.replace(r#"["ed", "mlmctdh"]"#, r#"["oracle"]"#);
        assert!(matches!(RunConfig::from_toml(&oracle), Err(HarnessError::Config(_))));
        let big = XYZ
            .replace("length = 8", "length = 20")
            .replace(r#"["ed", "mlmctdh"]"#, r#"["ed"]"#);
        assert!(RunConfig::from_toml(&big).is_err());
        let wrong_tree = XYZ
            .replace("length = 8", "length = 12")
            .replace(r#"["ed", "mlmctdh"]"#, r#"["mlmctdh"]"#);
        assert!(RunConfig::from_toml(&wrong_tree).is_err());
        let typo = XYZ.replace("alpha", "alhpa");
        assert!(RunConfig::from_toml(&typo).is_err());
    }

    #[test]
    fn ising_defaults() {
        let text = r#"
[lattice]
geometry = "square"
lx = 4
ly = 4

[model]
kind = "ising"
range = "nearest_neighbor"

[time]
t_max = 1.0
t_step = 0.25

[run]
backends = ["oracle", "dtwa"]
output = "o"
entropy = false
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.couplings(), [0.0, 0.0, 1.0]);
        assert_eq!(cfg.time_grid(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(cfg.dtwa().trajectories, 10_000);
        assert_eq!(cfg.coupling_mode(), CouplingMode::NearestNeighbor);
    }

    #[test]
    fn readme_example_parses() {
        let readme = include_str!("../../../README.md");
        let start = readme.find("```toml\n").expect("toml block") + 8;
        let len = readme[start..].find("```").unwrap();
        let cfg = RunConfig::from_toml(&readme[start..start + len]).unwrap();
        assert_eq!(cfg.sites().unwrap(), 16);
        assert_eq!(cfg.run.backends, vec![Backend::Mlmctdh, Backend::Ed, Backend::Dtwa]);
    }
}
