//! The experiment config file (TOML).
//!
//! Every knob is documented in the shipped `default.config`. Unknown keys
//! produce warnings rather than errors so older binaries accept newer files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use recscale_core::dlrm::{apply_scaling, DlrmConfig, Interaction, OptimizerConfig, Scheme, TableConfig};
use recscale_core::runs::{build_cross_grid, Grid, LossField};
use recscale_core::scalefit::DEFAULT_PHASE_THRESHOLD;
use recscale_core::synthgen::{FeatureSchema, TeacherSpec};
use recscale_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const STORE_ENV: &str = "RECSCALE_STORE";
pub const PARALLELISM_ENV: &str = "RECSCALE_PARALLELISM";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: FeatureSchema,
    pub teacher: TeacherSpec,
    pub model: ModelSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub sweep: SweepSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub paths: PathsSection,
}

/// The base ("1×") architecture. Its dense input width is the schema's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub tables: Vec<TableConfig>,
    pub bottom_widths: Vec<usize>,
    pub overarch_widths: Vec<usize>,
    #[serde(default)]
    pub interaction: Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub data_sizes: Vec<u64>,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub parallelism: usize,
    /// When false every record stores `wall_seconds = 0`, which makes
    /// stores byte-reproducible.
    #[serde(default = "yes")]
    pub record_wall_time: bool,
    /// Named grids; the name is what `sweep --scheme` selects.
    #[serde(default)]
    pub grids: BTreeMap<String, GridSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub scheme: Scheme,
    /// Multipliers, or target dims for horizontal scaling.
    pub factors: Vec<f64>,
    /// Overrides `sweep.data_sizes`.
    pub data_sizes: Option<Vec<u64>>,
    /// Overrides `sweep.seeds`.
    pub seeds: Option<Vec<u64>>,
    /// Vertical pre-scaling factors, for the horizontal × vertical grid.
    #[serde(default = "unit_vsf")]
    pub vsf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSection {
    pub y: LossField,
    pub margin: f64,
    pub phase_threshold: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            y: LossField::NeTest,
            margin: recscale_core::analysis::DEFAULT_MARGIN,
            phase_threshold: DEFAULT_PHASE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathsSection {
    pub store: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection { store: "runs.jsonl".into(), report_dir: "report".into() }
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn unit_vsf() -> Vec<f64> {
    vec![1.0]
}

/// A parsed config plus the keys it did not recognize.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub unknown_keys: Vec<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Loaded> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::parse(&text).map_err(|message| LabError::ConfigFile { path: path.to_owned(), message })
    }

    pub fn parse(text: &str) -> std::result::Result<Loaded, String> {
        let de = toml::Deserializer::parse(text).map_err(|e| e.to_string())?;
        let mut unknown_keys = Vec::new();
        let config: ExperimentConfig =
            serde_ignored::deserialize(de, |path| unknown_keys.push(path.to_string())).map_err(|e| e.to_string())?;
        Ok(Loaded { config, unknown_keys })
    }

    pub fn base_model(&self) -> DlrmConfig {
        DlrmConfig {
            num_dense: self.schema.num_dense,
            tables: self.model.tables.clone(),
            bottom_widths: self.model.bottom_widths.clone(),
            overarch_widths: self.model.overarch_widths.clone(),
            interaction: self.model.interaction,
            scheme_tag: None,
        }
    }

    /// Every invariant violation, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |r: recscale_core::Result<()>| {
            if let Err(e) = r {
                out.push(e.to_string());
            }
        };
        check(self.schema.validate());
        check(self.teacher.validate());
        let base = self.base_model();
        check(base.validate());
        check(self.optimizer.validate());
        check(self.train.validate());
        if self.model.tables.len() != self.schema.tables.len() {
            out.push(format!(
                "model.tables: {} tables but schema.tables has {}",
                self.model.tables.len(),
                self.schema.tables.len()
            ));
        }
        if self.sweep.parallelism == 0 {
            out.push("sweep.parallelism: must be at least 1".into());
        }
        if self.sweep.seeds.is_empty() {
            out.push("sweep.seeds: list must not be empty".into());
        }
        if self.sweep.data_sizes.is_empty() {
            out.push("sweep.data_sizes: list must not be empty".into());
        }
        if !(self.fit.margin.is_finite() && self.fit.margin >= 0.0) {
            out.push("fit.margin: must be finite and non-negative".into());
        }
        if !(self.fit.phase_threshold.is_finite() && self.fit.phase_threshold > 0.0) {
            out.push("fit.phase_threshold: must be finite and positive".into());
        }
        if base.validate().is_ok() {
            for (name, grid) in &self.sweep.grids {
                for &vsf in &grid.vsf {
                    if vsf != 1.0 {
                        if let Err(e) = apply_scaling(&base, Scheme::Vertical, vsf) {
                            out.push(format!("sweep.grids.{name}.vsf: {e}"));
                        }
                    }
                }
                if let Err(e) = self.grid(name) {
                    out.push(format!("sweep.grids.{name}: {e}"));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(LabError::Invalid(v))
        }
    }

    /// The run specs of one named grid.
    pub fn grid(&self, name: &str) -> Result<Grid> {
        let g = self
            .sweep
            .grids
            .get(name)
            .ok_or_else(|| LabError::Usage(format!("no grid named `{name}` in sweep.grids")))?;
        let data = g.data_sizes.as_deref().unwrap_or(&self.sweep.data_sizes);
        let seeds = g.seeds.as_deref().unwrap_or(&self.sweep.seeds);
        Ok(build_cross_grid(&self.base_model(), &g.vsf, g.scheme, &g.factors, data, seeds)?)
    }

    pub fn grid_names(&self) -> Vec<String> {
        self.sweep.grids.keys().cloned().collect()
    }
}

/// Store path from the flag, then `RECSCALE_STORE`, then the config.
pub fn resolve_store(flag: Option<&Path>, config: Option<&ExperimentConfig>) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.to_owned());
    }
    if let Some(p) = std::env::var_os(STORE_ENV) {
        return Ok(PathBuf::from(p));
    }
    config
        .map(|c| c.paths.store.clone())
        .ok_or_else(|| LabError::Usage("no store given: pass --store, set RECSCALE_STORE or pass --config".into()))
}

/// Parallelism from the flag, then `RECSCALE_PARALLELISM`, then the config.
pub fn resolve_parallelism(flag: Option<usize>, config: &ExperimentConfig) -> Result<usize> {
    let n = match (flag, std::env::var(PARALLELISM_ENV)) {
        (Some(n), _) => n,
        (None, Ok(s)) => s
            .trim()
            .parse()
            .map_err(|_| LabError::Usage(format!("{PARALLELISM_ENV}=`{s}` is not a positive integer")))?,
        (None, Err(_)) => config.sweep.parallelism,
    };
    if n == 0 {
        return Err(LabError::Usage("parallelism must be at least 1".into()));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[schema]
num_dense = 2
tables = [{ vocab_size = 10, hots = 1, zipf_exponent = 1.0 }]

[teacher]
seed = 1
target_ctr = 0.3
weight_scale = 1.0

[model]
tables = [{ rows = 8, dim = 4 }]
bottom_widths = [4]
overarch_widths = [1]

[sweep]
data_sizes = [100, 200]
seeds = [1]

[sweep.grids.vertical]
scheme = "vertical"
factors = [0.5, 1.0]
"#;

    #[test]
    fn minimal_config_is_valid() {
        let loaded = ExperimentConfig::parse(MINIMAL).unwrap();
        assert!(loaded.unknown_keys.is_empty());
        let cfg = loaded.config;
        assert!(cfg.violations().is_empty(), "{:?}", cfg.violations());
        assert_eq!(cfg.optimizer, OptimizerConfig::default());
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.grid("vertical").unwrap().specs.len(), 4);
    }

    #[test]
    fn unknown_keys_are_reported() {
        let text = MINIMAL.replace("seed = 1\n", "seed = 1\nflavour = \"mint\"\n");
        let loaded = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(loaded.unknown_keys, vec!["teacher.flavour".to_string()]);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = MINIMAL.replace("dim = 4", "dim = 0").replace("target_ctr = 0.3", "target_ctr = 1.5");
        let cfg = ExperimentConfig::parse(&text).unwrap().config;
        let v = cfg.violations();
        assert!(v.iter().any(|m| m.contains("dim")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("target_ctr")), "{v:?}");
    }
}
