use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::forecast::VarMode;
use crate::regressors::{Algorithm, SearchSpace};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    #[serde(rename = "elasticnet")]
    ElasticNet,
    None,
}

impl std::str::FromStr for SelectionMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "elasticnet" => Ok(SelectionMode::ElasticNet),
            "none" => Ok(SelectionMode::None),
            _ => Err(format!("unknown selection mode `{s}` (elasticnet|none)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Chrono,
    Random,
}

impl std::str::FromStr for SplitKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "chrono" => Ok(SplitKind::Chrono),
            "random" => Ok(SplitKind::Random),
            _ => Err(format!("unknown split mode `{s}` (chrono|random)")),
        }
    }
}

/// Run configuration, read from a flat TOML document. Unknown keys are
/// rejected. Relative paths resolve against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub tranches: Option<PathBuf>,
    pub climate_dir: Option<PathBuf>,
    /// Enforce the documented value ranges when parsing tranches.
    pub strict: bool,
    /// Fill interior climate gaps of up to two months linearly.
    pub interpolate: bool,
    pub features: Vec<FeatureSpec>,
    pub selection: SelectionMode,
    pub models: Vec<Algorithm>,
    pub split: SplitKind,
    /// Master seed; every stochastic stage derives its own seed from it.
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub lag_min: u32,
    pub lag_max: u32,
    pub search_draws: usize,
    pub search_folds: usize,
    pub shuffle_folds: Option<u64>,
    pub n_draws: usize,
    pub var_mode: VarMode,
    pub coverage: f64,
    pub synth_rows: usize,
    pub search_space: SearchSpace,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tranches: None,
            climate_dir: None,
            strict: true,
            interpolate: true,
            features: FeatureSpec::ALL.to_vec(),
            selection: SelectionMode::ElasticNet,
            models: Algorithm::ALL.to_vec(),
            split: SplitKind::Chrono,
            seed: 1,
            jobs: 1,
            out: PathBuf::from("out"),
            lag_min: 0,
            lag_max: 18,
            search_draws: 20,
            search_folds: 5,
            shuffle_folds: None,
            n_draws: 1000,
            var_mode: VarMode::Simulated,
            coverage: 0.05,
            synth_rows: 734,
            search_space: SearchSpace::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base_dir {
            for p in [&mut cfg.tranches, &mut cfg.climate_dir].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            if cfg.out.is_relative() {
                cfg.out = base.join(&cfg.out);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.features.is_empty() {
            return fail("features must list at least one spec".into());
        }
        if self.models.is_empty() {
            return fail("models must list at least one algorithm".into());
        }
        if self.jobs == 0 {
            return fail("jobs must be at least 1".into());
        }
        if self.lag_min > self.lag_max || self.lag_max > crate::dataset::MAX_LAG_MONTHS {
            return fail(format!("lag range {}..{} is invalid", self.lag_min, self.lag_max));
        }
        if self.search_draws == 0 || self.search_folds < 2 {
            return fail("search_draws must be >= 1 and search_folds >= 2".into());
        }
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return fail(format!("coverage {} outside (0, 1)", self.coverage));
        }
        Ok(())
    }

    /// Input paths must exist before any stage that reads them runs.
    pub fn require_inputs(&self) -> Result<(&Path, Option<&Path>)> {
        let tranches = self
            .tranches
            .as_deref()
            .ok_or_else(|| Error::Config("no tranche file configured (`tranches` or --tranches)".into()))?;
        if !tranches.is_file() {
            return Err(Error::Config(format!("tranche file {} does not exist", tranches.display())));
        }
        if let Some(dir) = self.climate_dir.as_deref() {
            if !dir.is_dir() {
                return Err(Error::Config(format!("climate directory {} does not exist", dir.display())));
            }
        }
        Ok((tranches, self.climate_dir.as_deref()))
    }
}
