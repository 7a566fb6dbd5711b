use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    fit, Algorithm, ArdParams, BayesRidgeParams, ForestParams, GradientBoostingParams, HistogramParams, MaxFeatures,
    ModelSpec, OlsParams, SecondOrderParams, TrainedModel,
};
use crate::error::{Error, Result};
use crate::stats;

/// Inclusive ranges sampled uniformly unless noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub n_trees: (usize, usize),
    pub max_depth: (usize, usize),
    pub min_samples_leaf: (usize, usize),
    pub n_rounds: (usize, usize),
    /// Log-uniform.
    pub learning_rate: (f64, f64),
    pub subsample: (f64, f64),
    pub lambda_reg: (f64, f64),
    /// Multiplied by the target variance so the leaf penalty is on the
    /// scale of the split gains.
    pub gamma_leaf: (f64, f64),
    pub n_bins: (usize, usize),
    pub max_leaves: (usize, usize),
    /// Log-uniform, shared by the noise and prior precisions.
    pub precision: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_trees: (100, 1000),
            max_depth: (2, 12),
            min_samples_leaf: (1, 10),
            n_rounds: (50, 1000),
            learning_rate: (0.01, 0.3),
            subsample: (0.5, 1.0),
            lambda_reg: (0.0, 10.0),
            gamma_leaf: (0.0, 5.0),
            n_bins: (32, 255),
            max_leaves: (4, 64),
            precision: (1e-6, 1e3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub space: SearchSpace,
    pub draws: usize,
    pub folds: usize,
    pub seed: u64,
    /// Shuffle rows with this seed before cutting folds; `None` keeps
    /// contiguous chronological blocks.
    pub shuffle_folds: Option<u64>,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            space: SearchSpace::default(),
            draws: 20,
            folds: 5,
            seed: 0,
            shuffle_folds: None,
        }
    }
}

fn int(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi.max(lo))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    uniform(rng, (lo.ln(), hi.ln())).exp().clamp(lo, hi)
}

/// One random configuration. `target_variance` scales the leaf penalty.
pub fn sample_spec(
    algorithm: Algorithm,
    space: &SearchSpace,
    target_variance: f64,
    model_seed: u64,
    rng: &mut ChaCha8Rng,
) -> ModelSpec {
    let s = space;
    let forest = |rng: &mut ChaCha8Rng, bootstrap| ForestParams {
        n_trees: int(rng, s.n_trees),
        max_features: *[MaxFeatures::Sqrt, MaxFeatures::Third, MaxFeatures::All].choose(rng).unwrap(),
        max_depth: Some(int(rng, s.max_depth)),
        min_samples_leaf: int(rng, s.min_samples_leaf),
        bootstrap,
        seed: model_seed,
    };
    match algorithm {
        Algorithm::Ols => ModelSpec::Ols(OlsParams::default()),
        Algorithm::Rf => ModelSpec::Rf(forest(rng, true)),
        Algorithm::Etr => ModelSpec::Etr(forest(rng, false)),
        Algorithm::Brr => ModelSpec::Brr(BayesRidgeParams {
            alpha: log_uniform(rng, s.precision),
            lambda: log_uniform(rng, s.precision),
            fit_intercept: true,
        }),
        Algorithm::Ard => ModelSpec::Ard(ArdParams {
            init_alpha: log_uniform(rng, s.precision),
            init_lambda: log_uniform(rng, s.precision),
            ..ArdParams::default()
        }),
        Algorithm::Gbr => ModelSpec::Gbr(GradientBoostingParams {
            n_rounds: int(rng, s.n_rounds),
            learning_rate: log_uniform(rng, s.learning_rate),
            max_depth: Some(int(rng, s.max_depth)),
            min_samples_leaf: int(rng, s.min_samples_leaf),
            subsample: uniform(rng, s.subsample),
            seed: model_seed,
        }),
        Algorithm::Xgb => ModelSpec::Xgb(SecondOrderParams {
            n_rounds: int(rng, s.n_rounds),
            learning_rate: log_uniform(rng, s.learning_rate),
            max_depth: Some(int(rng, s.max_depth)),
            min_samples_leaf: int(rng, s.min_samples_leaf),
            lambda: uniform(rng, s.lambda_reg),
            gamma: uniform(rng, s.gamma_leaf) * target_variance,
            subsample: uniform(rng, s.subsample),
            seed: model_seed,
        }),
        Algorithm::Lgbm => ModelSpec::Lgbm(HistogramParams {
            n_rounds: int(rng, s.n_rounds),
            learning_rate: log_uniform(rng, s.learning_rate),
            n_bins: int(rng, s.n_bins),
            max_leaves: int(rng, s.max_leaves),
            max_depth: None,
            min_samples_leaf: int(rng, s.min_samples_leaf),
            lambda: uniform(rng, s.lambda_reg),
            gamma: uniform(rng, s.gamma_leaf) * target_variance,
            subsample: uniform(rng, s.subsample),
            seed: model_seed,
        }),
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best: ModelSpec,
    pub best_index: usize,
    /// Mean out-of-fold RMSE of the best draw.
    pub cv_rmse: f64,
    /// Per-draw mean out-of-fold RMSE; failed draws score `+inf`.
    pub scores: Vec<f64>,
    /// Best configuration refit on all rows.
    pub model: TrainedModel,
}

fn make_folds(n: usize, folds: usize, shuffle: Option<u64>) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    let blocks = stats::contiguous_folds(n, folds);
    if let Some(small) = blocks.iter().find(|b| b.len() < 2) {
        return Err(Error::invalid(format!(
            "{n} rows give a fold of {} row(s) with {folds} folds",
            small.len()
        )));
    }
    Ok(match shuffle {
        None => blocks,
        Some(seed) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stats::rng(seed));
            blocks
                .into_iter()
                .map(|b| {
                    let mut rows: Vec<usize> = b.into_iter().map(|k| order[k]).collect();
                    rows.sort_unstable();
                    rows
                })
                .collect()
        }
    })
}

fn select_rows(x: &DMatrix<f64>, y: &[f64], rows: &[usize]) -> (DMatrix<f64>, Vec<f64>) {
    let xs = DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]);
    (xs, rows.iter().map(|&i| y[i]).collect())
}

fn cv_score(spec: &ModelSpec, x: &DMatrix<f64>, y: &[f64], folds: &[Vec<usize>]) -> Result<f64> {
    let n = y.len();
    let per_fold: Vec<f64> = folds
        .par_iter()
        .map(|held| {
            let mut in_fold = vec![false; n];
            held.iter().for_each(|&i| in_fold[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
            let (xt, yt) = select_rows(x, y, &train);
            let (xv, yv) = select_rows(x, y, held);
            let model = fit(spec, &xt, &yt)?;
            Ok(stats::rmse(&model.predict(&xv)?, &yv))
        })
        .collect::<Result<_>>()?;
    Ok(stats::mean(&per_fold))
}

/// Scores every candidate by mean out-of-fold RMSE and refits the best on
/// all rows. Ties keep the earlier candidate.
pub fn search_candidates(
    x: &DMatrix<f64>,
    y: &[f64],
    candidates: &[ModelSpec],
    folds: usize,
    shuffle_folds: Option<u64>,
) -> Result<SearchResult> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate configurations"));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    let fold_rows = make_folds(y.len(), folds, shuffle_folds)?;
    let scores: Vec<f64> = candidates
        .iter()
        .enumerate()
        .map(|(d, spec)| match cv_score(spec, x, y, &fold_rows) {
            Ok(s) if s.is_finite() => s,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                log::warn!("draw {d} ({}) failed: {e}", spec.algorithm());
                f64::INFINITY
            }
        })
        .collect();
    let (best_index, cv_rmse) = scores
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bs), (i, s)| if s < bs { (i, s) } else { (bi, bs) });
    if !cv_rmse.is_finite() {
        return Err(Error::invalid(format!(
            "every {} configuration failed cross-validation",
            candidates[0].algorithm()
        )));
    }
    let best = candidates[best_index].clone();
    let model = fit(&best, x, y)?;
    Ok(SearchResult {
        best,
        best_index,
        cv_rmse,
        scores,
        model,
    })
}

/// Randomized search: `draws` configurations sampled from the space,
/// each scored by K-fold cross-validation. Draw `d` fits with seed
/// `mix_seed(seed, d)`.
pub fn random_search_cv(x: &DMatrix<f64>, y: &[f64], algorithm: Algorithm, search: &SearchSpec) -> Result<SearchResult> {
    if search.draws == 0 {
        return Err(Error::invalid("draws must be at least 1"));
    }
    let target_variance = if y.len() > 1 { stats::sample_variance(y) } else { 0.0 };
    let mut rng = stats::task_rng(search.seed, u64::MAX);
    // A model without hyperparameters needs a single evaluation.
    let draws = if algorithm == Algorithm::Ols { 1 } else { search.draws };
    let candidates: Vec<ModelSpec> = (0..draws)
        .map(|d| sample_spec(algorithm, &search.space, target_variance, stats::mix_seed(search.seed, d as u64), &mut rng))
        .collect();
    search_candidates(x, y, &candidates, search.folds, search.shuffle_folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = stats::rng(8);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>());
        let y = (0..n).map(|i| x[(i, 0)] + 0.1 * rng.random::<f64>()).collect();
        (x, y)
    }

    fn tiny_space() -> SearchSpace {
        SearchSpace {
            n_trees: (5, 15),
            n_rounds: (5, 20),
            max_depth: (2, 4),
            ..SearchSpace::default()
        }
    }

    #[test]
    fn single_draw_is_returned() {
        let (x, y) = data(40);
        let spec = ModelSpec::default_for(Algorithm::Brr, 0);
        let r = search_candidates(&x, &y, std::slice::from_ref(&spec), 5, None).unwrap();
        assert_eq!(r.best, spec);
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn dominant_draw_wins() {
        let (x, y) = data(50);
        let good = ModelSpec::Gbr(GradientBoostingParams { n_rounds: 50, ..Default::default() });
        let bad = ModelSpec::Gbr(GradientBoostingParams { n_rounds: 0, ..Default::default() });
        let r = search_candidates(&x, &y, &[bad.clone(), good.clone()], 5, None).unwrap();
        assert_eq!(r.best, good);
        // Ties keep the earlier draw.
        let r = search_candidates(&x, &y, &[bad.clone(), bad.clone()], 5, None).unwrap();
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn seeded_search_is_deterministic() {
        let (x, y) = data(60);
        let spec = SearchSpec { space: tiny_space(), draws: 20, seed: 5, ..Default::default() };
        let a = random_search_cv(&x, &y, Algorithm::Etr, &spec).unwrap();
        let b = random_search_cv(&x, &y, Algorithm::Etr, &spec).unwrap();
        assert_eq!(a.best_index, b.best_index);
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn small_folds_rejected() {
        let (x, y) = data(9);
        assert!(search_candidates(&x, &y, &[ModelSpec::default_for(Algorithm::Ols, 0)], 5, None).is_err());
        assert!(search_candidates(&x, &y, &[ModelSpec::default_for(Algorithm::Ols, 0)], 1, None).is_err());
    }

    #[test]
    fn shuffled_folds_partition_rows() {
        let folds = make_folds(23, 5, Some(3)).unwrap();
        let mut all = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_ne!(folds, make_folds(23, 5, None).unwrap());
    }

    #[test]
    fn sampled_specs_stay_in_range() {
        let space = SearchSpace::default();
        let mut rng = stats::rng(1);
        for algorithm in Algorithm::ALL {
            for _ in 0..50 {
                match sample_spec(algorithm, &space, 2.0, 0, &mut rng) {
                    ModelSpec::Rf(p) | ModelSpec::Etr(p) => {
                        assert!((100..=1000).contains(&p.n_trees));
                        assert!((2..=12).contains(&p.max_depth.unwrap()));
                    }
                    ModelSpec::Brr(p) => {
                        assert!((1e-6..=1e3).contains(&p.alpha) && (1e-6..=1e3).contains(&p.lambda));
                    }
                    ModelSpec::Xgb(p) => {
                        assert!((0.01..=0.3).contains(&p.learning_rate));
                        assert!((0.0..=10.0).contains(&p.lambda) && (0.0..=10.0).contains(&p.gamma));
                    }
                    ModelSpec::Lgbm(p) => assert!((32..=255).contains(&p.n_bins)),
                    _ => {}
                }
            }
        }
    }
}
