use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, GrowParams, RegressionTree, Thresholds};
use super::{EnsembleKind, EnsembleModel};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Third,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((p as f64).sqrt().round() as usize).max(1),
            MaxFeatures::Third => (p / 3).max(1),
            MaxFeatures::All => p,
            MaxFeatures::Count(m) => m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Resample rows with replacement per tree. Random forests default to
    /// true, extra trees to false.
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    pub fn random_forest(seed: u64) -> Self {
        Self {
            n_trees: 200,
            max_features: MaxFeatures::Third,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
            seed,
        }
    }

    pub fn extra_trees(seed: u64) -> Self {
        Self {
            bootstrap: false,
            ..Self::random_forest(seed)
        }
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64], params: &ForestParams) -> Result<usize> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if y.len() < 2 {
        return Err(Error::invalid("forest needs at least 2 rows"));
    }
    if params.n_trees == 0 {
        return Err(Error::invalid("n_trees must be positive"));
    }
    let m = params.max_features.resolve(x.ncols());
    if m == 0 || m > x.ncols() {
        return Err(Error::invalid(format!("max_features {m} outside 1..={}", x.ncols())));
    }
    Ok(m)
}

fn fit_ensemble(
    x: &DMatrix<f64>,
    y: &[f64],
    params: &ForestParams,
    thresholds: Thresholds,
    kind: EnsembleKind,
) -> Result<EnsembleModel> {
    let m = check_inputs(x, y, params)?;
    let n = y.len();
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(m),
        thresholds,
        criterion: Criterion::Variance,
    };
    let trees: Vec<RegressionTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stats::task_rng(params.seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(x, y, &rows, &grow_params, &mut rng)
        })
        .collect();
    let w = 1.0 / trees.len() as f64;
    let mut model = EnsembleModel {
        kind,
        tree_weights: vec![w; trees.len()],
        trees,
        learning_rate: 1.0,
        base_prediction: 0.0,
        n_features: x.ncols(),
        training_loss: Vec::new(),
    };
    let pred = model.predict_unchecked(x);
    model.training_loss.push(super::half_mse(y, &pred));
    Ok(model)
}

/// Bagged greedy CART trees on a random feature subset per node.
pub fn fit_forest(x: &DMatrix<f64>, y: &[f64], params: &ForestParams) -> Result<EnsembleModel> {
    fit_ensemble(x, y, params, Thresholds::Exhaustive, EnsembleKind::RandomForest)
}

/// Extremely randomized trees: one uniform threshold per sampled feature.
pub fn fit_extra_trees(x: &DMatrix<f64>, y: &[f64], params: &ForestParams) -> Result<EnsembleModel> {
    fit_ensemble(x, y, params, Thresholds::RandomUniform, EnsembleKind::ExtraTrees)
}
