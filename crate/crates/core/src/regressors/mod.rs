//! Eight regression algorithms behind one fit/predict contract, and a
//! randomized hyperparameter search with K-fold cross-validation.

mod bayes;
mod boosting;
mod forest;
mod histogram;
mod linear;
mod search;
mod tree;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use bayes::{
    fit_ard, fit_bayesian_ridge, posterior, ArdParams, BayesRidgeParams, BayesianLinearModel, Posterior,
    MAX_CONDITION, PRECISION_MAX, PRECISION_MIN,
};
pub use boosting::{fit_gradient_boosting, fit_second_order_boosting, GradientBoostingParams, SecondOrderParams};
pub use forest::{fit_extra_trees, fit_forest, ForestParams, MaxFeatures};
pub use histogram::{fit_histogram_boosting, BinMapper, HistogramParams};
pub use linear::{fit_ols, LinearModel, OlsParams};
pub use search::{random_search_cv, sample_spec, search_candidates, SearchResult, SearchSpace, SearchSpec};
pub use tree::{thresholds_strictly_inside, variance_reduction, Node, RegressionTree};

use crate::error::{Error, Result};

/// Greedy variance-reduction tree on all rows and features (plain CART).
pub fn fit_cart(x: &DMatrix<f64>, y: &[f64], max_depth: Option<usize>, min_samples_leaf: usize) -> RegressionTree {
    let params = tree::GrowParams {
        max_depth,
        min_samples_leaf,
        max_features: None,
        thresholds: tree::Thresholds::Exhaustive,
        criterion: tree::Criterion::Variance,
    };
    let rows: Vec<usize> = (0..y.len()).collect();
    tree::grow(x, y, &rows, &params, &mut crate::stats::rng(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ols,
    Rf,
    Brr,
    Gbr,
    Etr,
    Ard,
    Lgbm,
    Xgb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Ols,
        Algorithm::Rf,
        Algorithm::Brr,
        Algorithm::Gbr,
        Algorithm::Etr,
        Algorithm::Ard,
        Algorithm::Lgbm,
        Algorithm::Xgb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ols => "ols",
            Algorithm::Rf => "rf",
            Algorithm::Brr => "brr",
            Algorithm::Gbr => "gbr",
            Algorithm::Etr => "etr",
            Algorithm::Ard => "ard",
            Algorithm::Lgbm => "lgbm",
            Algorithm::Xgb => "xgb",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Ols => "OLS",
            Algorithm::Rf => "RF",
            Algorithm::Brr => "BRR",
            Algorithm::Gbr => "GBR",
            Algorithm::Etr => "ETR",
            Algorithm::Ard => "ARD",
            Algorithm::Lgbm => "LGBM",
            Algorithm::Xgb => "XGB",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown model `{s}`")))
    }
}

/// Hyperparameters for one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum ModelSpec {
    Ols(OlsParams),
    Rf(ForestParams),
    Brr(BayesRidgeParams),
    Gbr(GradientBoostingParams),
    Etr(ForestParams),
    Ard(ArdParams),
    Lgbm(HistogramParams),
    Xgb(SecondOrderParams),
}

impl ModelSpec {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            ModelSpec::Ols(_) => Algorithm::Ols,
            ModelSpec::Rf(_) => Algorithm::Rf,
            ModelSpec::Brr(_) => Algorithm::Brr,
            ModelSpec::Gbr(_) => Algorithm::Gbr,
            ModelSpec::Etr(_) => Algorithm::Etr,
            ModelSpec::Ard(_) => Algorithm::Ard,
            ModelSpec::Lgbm(_) => Algorithm::Lgbm,
            ModelSpec::Xgb(_) => Algorithm::Xgb,
        }
    }

    pub fn default_for(algorithm: Algorithm, seed: u64) -> Self {
        match algorithm {
            Algorithm::Ols => ModelSpec::Ols(OlsParams::default()),
            Algorithm::Rf => ModelSpec::Rf(ForestParams::random_forest(seed)),
            Algorithm::Brr => ModelSpec::Brr(BayesRidgeParams::default()),
            Algorithm::Gbr => ModelSpec::Gbr(GradientBoostingParams { seed, ..Default::default() }),
            Algorithm::Etr => ModelSpec::Etr(ForestParams::extra_trees(seed)),
            Algorithm::Ard => ModelSpec::Ard(ArdParams::default()),
            Algorithm::Lgbm => ModelSpec::Lgbm(HistogramParams { seed, ..Default::default() }),
            Algorithm::Xgb => ModelSpec::Xgb(SecondOrderParams { seed, ..Default::default() }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    RandomForest,
    ExtraTrees,
    GradientBoosting,
    SecondOrder,
    Histogram,
}

/// `F(x) = F₀ + ν Σ_k γ_k h_k(x)`. Forests use `F₀ = 0`, `ν = 1` and
/// `γ_k = 1/T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub kind: EnsembleKind,
    pub trees: Vec<RegressionTree>,
    pub tree_weights: Vec<f64>,
    pub learning_rate: f64,
    pub base_prediction: f64,
    pub n_features: usize,
    /// `½·mean((y − F)²)` on the training rows after each stage; boosters
    /// record one entry for `F₀` plus one per round.
    pub training_loss: Vec<f64>,
}

impl EnsembleModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::ColumnMismatch { expected: self.n_features, got: x.ncols() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let sum: f64 = self
                    .trees
                    .iter()
                    .zip(&self.tree_weights)
                    .map(|(t, w)| w * t.predict_row(x, i))
                    .sum();
                self.base_prediction + self.learning_rate * sum
            })
            .collect()
    }
}

pub(crate) fn half_mse(y: &[f64], f: &[f64]) -> f64 {
    0.5 * y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedModel {
    Linear(LinearModel),
    Bayesian(BayesianLinearModel),
    Ensemble(EnsembleModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub n_features: usize,
    pub model: FittedModel,
}

pub const ARTIFACT_FORMAT: &str = "catbond-model";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Artifact {
    format: String,
    version: u32,
    algorithm: Algorithm,
    hyperparameters: ModelSpec,
    n_features: usize,
    model: FittedModel,
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        self.spec.algorithm()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::ColumnMismatch { expected: self.n_features, got: x.ncols() });
        }
        Ok(match &self.model {
            FittedModel::Linear(m) => m.predict(x),
            FittedModel::Bayesian(m) => m.predict(x),
            FittedModel::Ensemble(m) => m.predict_unchecked(x),
        })
    }

    /// Self-describing JSON artifact tagged with format and version.
    pub fn to_json(&self) -> Result<String> {
        let artifact = Artifact {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            algorithm: self.algorithm(),
            hyperparameters: self.spec.clone(),
            n_features: self.n_features,
            model: self.model.clone(),
        };
        Ok(serde_json::to_string_pretty(&artifact)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: serde_json::Value = serde_json::from_str(text)?;
        let format = header.get("format").and_then(|v| v.as_str());
        if format != Some(ARTIFACT_FORMAT) {
            return Err(Error::Artifact(format!("format {format:?} is not `{ARTIFACT_FORMAT}`")));
        }
        let version = header.get("version").and_then(|v| v.as_u64());
        match version {
            Some(v) if v <= ARTIFACT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Artifact(format!(
                    "artifact version {v} is newer than supported version {ARTIFACT_VERSION}"
                )))
            }
            None => return Err(Error::Artifact("missing version".into())),
        }
        let artifact: Artifact = serde_json::from_value(header)?;
        if artifact.algorithm != artifact.hyperparameters.algorithm() {
            return Err(Error::Artifact("algorithm tag disagrees with hyperparameters".into()));
        }
        Ok(Self {
            spec: artifact.hyperparameters,
            n_features: artifact.n_features,
            model: artifact.model,
        })
    }
}

pub fn fit(spec: &ModelSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<TrainedModel> {
    let model = match spec {
        ModelSpec::Ols(p) => FittedModel::Linear(fit_ols(x, y, p)?),
        ModelSpec::Rf(p) => FittedModel::Ensemble(fit_forest(x, y, p)?),
        ModelSpec::Brr(p) => FittedModel::Bayesian(fit_bayesian_ridge(x, y, p)?),
        ModelSpec::Gbr(p) => FittedModel::Ensemble(fit_gradient_boosting(x, y, p)?),
        ModelSpec::Etr(p) => FittedModel::Ensemble(fit_extra_trees(x, y, p)?),
        ModelSpec::Ard(p) => FittedModel::Bayesian(fit_ard(x, y, p)?),
        ModelSpec::Lgbm(p) => FittedModel::Ensemble(fit_histogram_boosting(x, y, p)?),
        ModelSpec::Xgb(p) => FittedModel::Ensemble(fit_second_order_boosting(x, y, p)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        n_features: x.ncols(),
        model,
    })
}
