//! Gradient boosting on squared loss `L = ½(y − F)²`, so pseudo-residuals
//! are plain residuals and every hessian is 1.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, GrowParams, RegressionTree, Thresholds};
use super::{half_mse, EnsembleKind, EnsembleModel};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostingParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn without replacement per round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GradientBoostingParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Per-leaf complexity penalty.
    pub gamma: f64,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for SecondOrderParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_samples_leaf: 1,
            lambda: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

pub(crate) fn validate_boosting(x: &DMatrix<f64>, y: &[f64], learning_rate: f64, subsample: f64) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(learning_rate > 0.0 && learning_rate <= 1.0) {
        return Err(Error::invalid(format!("learning rate {learning_rate} outside (0, 1]")));
    }
    if !(subsample > 0.0 && subsample <= 1.0) {
        return Err(Error::invalid(format!("subsample {subsample} outside (0, 1]")));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    Ok(())
}

pub(crate) fn round_rows(n: usize, subsample: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if subsample >= 1.0 {
        return (0..n).collect();
    }
    let k = ((n as f64 * subsample).round() as usize).clamp(1, n);
    let mut rows = sample(rng, n, k).into_vec();
    rows.sort_unstable();
    rows
}

/// Shared boosting loop; `fit_round` builds one tree from the current
/// residuals `y − F` on the given rows.
pub(crate) fn boost(
    x: &DMatrix<f64>,
    y: &[f64],
    n_rounds: usize,
    learning_rate: f64,
    subsample: f64,
    seed: u64,
    kind: EnsembleKind,
    mut fit_round: impl FnMut(&[f64], &[usize], &mut ChaCha8Rng) -> (RegressionTree, f64),
) -> EnsembleModel {
    let n = y.len();
    let base = stats::mean(y);
    let mut f = vec![base; n];
    let mut trees = Vec::with_capacity(n_rounds);
    let mut weights = Vec::with_capacity(n_rounds);
    let mut loss = vec![half_mse(y, &f)];
    let mut rng = stats::rng(seed);
    for _ in 0..n_rounds {
        let residuals: Vec<f64> = y.iter().zip(&f).map(|(y, f)| y - f).collect();
        let rows = round_rows(n, subsample, &mut rng);
        let (tree, gamma) = fit_round(&residuals, &rows, &mut rng);
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += learning_rate * gamma * tree.predict_row(x, i);
        }
        loss.push(half_mse(y, &f));
        trees.push(tree);
        weights.push(gamma);
    }
    EnsembleModel {
        kind,
        trees,
        tree_weights: weights,
        learning_rate,
        base_prediction: base,
        n_features: x.ncols(),
        training_loss: loss,
    }
}

/// Line search `argmin_γ Σ ½(r − γh)²` over the fitted rows.
fn line_search(tree: &RegressionTree, x: &DMatrix<f64>, residuals: &[f64], rows: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &i in rows {
        let h = tree.predict_row(x, i);
        num += residuals[i] * h;
        den += h * h;
    }
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Classical gradient boosting: variance-reduction trees on residuals.
pub fn fit_gradient_boosting(x: &DMatrix<f64>, y: &[f64], params: &GradientBoostingParams) -> Result<EnsembleModel> {
    validate_boosting(x, y, params.learning_rate, params.subsample)?;
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
        thresholds: Thresholds::Exhaustive,
        criterion: Criterion::Variance,
    };
    Ok(boost(
        x,
        y,
        params.n_rounds,
        params.learning_rate,
        params.subsample,
        params.seed,
        EnsembleKind::GradientBoosting,
        |residuals, rows, rng| {
            let tree = grow(x, residuals, rows, &grow_params, rng);
            // Leaves are residual means over the fitted rows, which makes the
            // squared-loss line search exactly 1.
            let gamma = line_search(&tree, x, residuals, rows);
            debug_assert!((gamma - 1.0).abs() < 1e-6, "line search gave {gamma}");
            (tree, 1.0)
        },
    ))
}

/// Second-order boosting with regularized leaf weights `−G/(H+λ)` and the
/// split gain penalized by `γ` per leaf.
pub fn fit_second_order_boosting(x: &DMatrix<f64>, y: &[f64], params: &SecondOrderParams) -> Result<EnsembleModel> {
    validate_boosting(x, y, params.learning_rate, params.subsample)?;
    if params.lambda < 0.0 || params.gamma < 0.0 {
        return Err(Error::invalid("lambda and gamma must be non-negative"));
    }
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
        thresholds: Thresholds::Exhaustive,
        criterion: Criterion::SecondOrder { lambda: params.lambda, gamma: params.gamma },
    };
    Ok(boost(
        x,
        y,
        params.n_rounds,
        params.learning_rate,
        params.subsample,
        params.seed,
        EnsembleKind::SecondOrder,
        |residuals, rows, rng| {
            let gradients: Vec<f64> = residuals.iter().map(|r| -r).collect();
            (grow(x, &gradients, rows, &grow_params, rng), 1.0)
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn data(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = stats::rng(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
        let y = (0..n).map(|i| (3.0 * x[(i, 0)]).sin() + x[(i, p - 1)] + 0.2 * rng.random::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn zero_rounds_is_mean() {
        let (x, y) = data(1, 20, 2);
        let params = GradientBoostingParams { n_rounds: 0, ..Default::default() };
        let model = fit_gradient_boosting(&x, &y, &params).unwrap();
        let m = stats::mean(&y);
        assert!(model.predict_unchecked(&x).iter().all(|&v| v == m));
    }

    #[test]
    fn one_full_round_interpolates() {
        let (x, y) = data(2, 30, 3);
        let params = GradientBoostingParams {
            n_rounds: 1,
            learning_rate: 1.0,
            max_depth: None,
            ..Default::default()
        };
        let model = fit_gradient_boosting(&x, &y, &params).unwrap();
        for (p, t) in model.predict_unchecked(&x).iter().zip(&y) {
            assert!((p - t).abs() < 1e-12);
        }
    }

    #[test]
    fn root_leaf_is_residual_mean_without_penalty() {
        let (x, y) = data(3, 25, 2);
        let params = SecondOrderParams {
            n_rounds: 1,
            learning_rate: 1.0,
            max_depth: Some(0),
            lambda: 0.0,
            ..Default::default()
        };
        let model = fit_second_order_boosting(&x, &y, &params).unwrap();
        // Residuals against F0 = mean(y) average to zero.
        let w: Vec<f64> = model.trees[0].leaf_values().collect();
        assert_eq!(w.len(), 1);
        assert!(w[0].abs() < 1e-15);
    }

    #[test]
    fn huge_gamma_gives_stumps_only() {
        let (x, y) = data(4, 40, 3);
        let params = SecondOrderParams { n_rounds: 5, gamma: 1e9, ..Default::default() };
        let model = fit_second_order_boosting(&x, &y, &params).unwrap();
        assert!(model.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn matches_gradient_boosting_without_penalty() {
        let (x, y) = data(5, 40, 3);
        let gb = fit_gradient_boosting(
            &x,
            &y,
            &GradientBoostingParams { n_rounds: 20, learning_rate: 0.3, max_depth: Some(3), ..Default::default() },
        )
        .unwrap();
        let so = fit_second_order_boosting(
            &x,
            &y,
            &SecondOrderParams { n_rounds: 20, learning_rate: 0.3, max_depth: Some(3), lambda: 0.0, ..Default::default() },
        )
        .unwrap();
        for (a, b) in gb.predict_unchecked(&x).iter().zip(so.predict_unchecked(&x)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn subsampled_rounds_are_seeded() {
        let (x, y) = data(6, 50, 3);
        let params = GradientBoostingParams { subsample: 0.6, seed: 11, ..Default::default() };
        assert_eq!(fit_gradient_boosting(&x, &y, &params).unwrap(), fit_gradient_boosting(&x, &y, &params).unwrap());
    }

    #[test]
    fn rejects_bad_rates() {
        let (x, y) = data(7, 10, 2);
        let params = GradientBoostingParams { learning_rate: 0.0, ..Default::default() };
        assert!(fit_gradient_boosting(&x, &y, &params).is_err());
        let params = SecondOrderParams { lambda: -1.0, ..Default::default() };
        assert!(fit_second_order_boosting(&x, &y, &params).is_err());
    }
}
