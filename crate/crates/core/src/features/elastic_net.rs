//! Elastic-net regression by cyclic coordinate descent, with a grid-search
//! cross-validation helper used for feature selection.
//!
//! Objective over `(b, β)`:
//!
//! ```text
//! (1/2n) ||y - Xβ - b||² + λ (α ||β||₁ + (1-α)/2 ||β||²)
//! ```

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::FeatureMatrix;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub alpha_mix: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// Objective value after each full sweep.
    pub objective_trace: Vec<f64>,
}

impl ElasticNetFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| self.intercept + (0..x.ncols()).map(|j| x[(i, j)] * self.coefficients[j]).sum::<f64>())
            .collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|b| b.abs()).sum()
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Centred design kept column-major for the coordinate loop.
struct Centered {
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    sq_norms: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
}

impl Centered {
    fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let n = x.nrows() as f64;
        let y_mean = stats::mean(y);
        let mut cols = Vec::with_capacity(x.ncols());
        let mut means = Vec::with_capacity(x.ncols());
        let mut sq_norms = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let c: Vec<f64> = col.iter().map(|v| v - m).collect();
            sq_norms.push(c.iter().map(|v| v * v).sum::<f64>() / n);
            means.push(m);
            cols.push(c);
        }
        Self {
            cols,
            means,
            sq_norms,
            y: y.iter().map(|v| v - y_mean).collect(),
            y_mean,
        }
    }
}

fn objective(resid: &[f64], beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let n = resid.len() as f64;
    let rss = resid.iter().map(|r| r * r).sum::<f64>();
    let l1 = beta.iter().map(|b| b.abs()).sum::<f64>();
    let l2 = beta.iter().map(|b| b * b).sum::<f64>();
    rss / (2.0 * n) + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
}

fn coordinate_descent(
    c: &Centered,
    lambda: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
    warm: Option<&[f64]>,
) -> ElasticNetFit {
    let n = c.y.len();
    let p = c.cols.len();
    let nf = n as f64;
    let mut beta = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; p]);
    let mut resid = c.y.clone();
    for (j, b) in beta.iter().enumerate() {
        if *b != 0.0 {
            for (r, x) in resid.iter_mut().zip(&c.cols[j]) {
                *r -= x * b;
            }
        }
    }
    let l1 = lambda * alpha;
    let l2 = lambda * (1.0 - alpha);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            let denom = c.sq_norms[j] + l2;
            let old = beta[j];
            let new = if denom > 0.0 {
                let rho = c.cols[j].iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / nf + c.sq_norms[j] * old;
                soft_threshold(rho, l1) / denom
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                for (r, x) in resid.iter_mut().zip(&c.cols[j]) {
                    *r -= x * delta;
                }
                beta[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        trace.push(objective(&resid, &beta, lambda, alpha));
        if max_change < tol {
            converged = true;
            break;
        }
    }
    let intercept = c.y_mean - c.means.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    ElasticNetFit {
        coefficients: beta,
        intercept,
        lambda,
        alpha_mix: alpha,
        n_iterations: iterations,
        converged,
        objective_trace: trace,
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64], lambda: f64, alpha_mix: f64) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("elastic net inputs must be finite"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(0.0..=1.0).contains(&alpha_mix) {
        return Err(Error::invalid(format!("alpha_mix must lie in [0, 1], got {alpha_mix}")));
    }
    Ok(())
}

/// Fits the elastic net. Running out of iterations is not an error; the
/// fit comes back with `converged == false`.
pub fn elastic_net(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    alpha_mix: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ElasticNetFit> {
    check_inputs(x, y, lambda, alpha_mix)?;
    Ok(coordinate_descent(&Centered::new(x, y), lambda, alpha_mix, tol, max_iter, None))
}

/// Column names whose coefficient magnitude exceeds `threshold`, in column order.
pub fn select_features(fit: &ElasticNetFit, columns: &[String], threshold: f64) -> Vec<String> {
    fit.coefficients
        .iter()
        .zip(columns)
        .filter(|(b, _)| b.abs() > threshold)
        .map(|(_, c)| c.clone())
        .collect()
}

/// Penalty grid searched by cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetGrid {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub folds: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ElasticNetGrid {
    /// 30 log-spaced lambdas on [1e-4, 1e1] times alpha in {0.1, ..., 0.9}, 5 folds.
    fn default() -> Self {
        let lambdas = (0..30)
            .map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / 29.0))
            .collect();
        Self {
            lambdas,
            alphas: (1..=9).map(|k| k as f64 / 10.0).collect(),
            folds: 5,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetCv {
    pub lambda: f64,
    pub alpha_mix: f64,
    pub cv_rmse: f64,
    pub fit: ElasticNetFit,
}

/// Grid search over `(λ, α)` minimizing mean out-of-fold RMSE on contiguous
/// folds, then a refit on all rows. Ties go to the earlier grid point
/// (alpha-major, lambdas in the given order).
pub fn elastic_net_cv(x: &DMatrix<f64>, y: &[f64], grid: &ElasticNetGrid) -> Result<ElasticNetCv> {
    check_inputs(x, y, 0.0, 0.5)?;
    if grid.lambdas.is_empty() || grid.alphas.is_empty() || grid.folds < 2 {
        return Err(Error::invalid("elastic-net grid needs lambdas, alphas and >= 2 folds"));
    }
    let folds = stats::contiguous_folds(x.nrows(), grid.folds);
    if folds.iter().any(|f| f.len() < 2) {
        return Err(Error::invalid("cross-validation fold with fewer than 2 rows"));
    }
    // Warm starts run from the largest lambda down.
    let mut order: Vec<usize> = (0..grid.lambdas.len()).collect();
    order.sort_by(|&a, &b| grid.lambdas[b].total_cmp(&grid.lambdas[a]));

    let fold_scores: Vec<Vec<Vec<f64>>> = folds
        .par_iter()
        .map(|held| {
            let train: Vec<usize> = (0..x.nrows()).filter(|i| !held.contains(i)).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let xv = x.select_rows(held);
            let yv: Vec<f64> = held.iter().map(|&i| y[i]).collect();
            let centered = Centered::new(&xt, &yt);
            grid.alphas
                .iter()
                .map(|&alpha| {
                    let mut scores = vec![0.0; grid.lambdas.len()];
                    let mut warm: Option<Vec<f64>> = None;
                    for &li in &order {
                        let fit = coordinate_descent(&centered, grid.lambdas[li], alpha, grid.tol, grid.max_iter, warm.as_deref());
                        scores[li] = stats::rmse(&fit.predict(&xv), &yv);
                        warm = Some(fit.coefficients);
                    }
                    scores
                })
                .collect()
        })
        .collect();

    let mut best: Option<(f64, usize, usize)> = None;
    for ai in 0..grid.alphas.len() {
        for li in 0..grid.lambdas.len() {
            let score = fold_scores.iter().map(|f| f[ai][li]).sum::<f64>() / folds.len() as f64;
            if best.is_none_or(|(b, _, _)| score < b) {
                best = Some((score, ai, li));
            }
        }
    }
    let (cv_rmse, ai, li) = best.unwrap();
    let fit = elastic_net(x, y, grid.lambdas[li], grid.alphas[ai], grid.tol, grid.max_iter)?;
    Ok(ElasticNetCv {
        lambda: grid.lambdas[li],
        alpha_mix: grid.alphas[ai],
        cv_rmse,
        fit,
    })
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub cv: ElasticNetCv,
    pub selected: Vec<String>,
}

/// Standardizes every column of `fm` (dummies included) on `rows`, tunes the
/// elastic net by cross-validation on those rows and keeps the columns with
/// a non-zero coefficient.
pub fn elastic_net_select(fm: &FeatureMatrix, rows: &[usize], grid: &ElasticNetGrid) -> Result<Selection> {
    let (mut x, y) = fm.rows(rows);
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let m = stats::mean(&col);
        let s = stats::sample_std(&col);
        let s = if s > 0.0 { s } else { 1.0 };
        x.column_mut(j).apply(|v| *v = (*v - m) / s);
    }
    let cv = elastic_net_cv(&x, &y, grid)?;
    let selected = select_features(&cv.fit, &fm.columns, 0.0);
    Ok(Selection { cv, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = stats::rng(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let y = (0..n)
            .map(|i| {
                (0..p).map(|j| x[(i, j)] * (j as f64 - 1.5)).sum::<f64>() + 0.3 + 0.5 * rng.random::<f64>()
            })
            .collect();
        (x, y)
    }

    /// OLS with intercept via normal equations on the augmented design.
    fn ols_oracle(x: &DMatrix<f64>, y: &[f64]) -> (Vec<f64>, f64) {
        let n = x.nrows();
        let p = x.ncols();
        let xa = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let yv = nalgebra::DVector::from_column_slice(y);
        let sol = (xa.transpose() * &xa).cholesky().unwrap().solve(&(xa.transpose() * yv));
        (sol.iter().skip(1).copied().collect(), sol[0])
    }

    #[test]
    fn zero_penalty_is_ols() {
        let (x, y) = random_problem(1, 60, 4);
        let fit = elastic_net(&x, &y, 0.0, 0.5, 1e-14, 100_000).unwrap();
        assert!(fit.converged);
        let (beta, b0) = ols_oracle(&x, &y);
        for (a, b) in fit.coefficients.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!((fit.intercept - b0).abs() < 1e-8);
    }

    #[test]
    fn large_penalty_zeroes_everything() {
        let (x, y) = random_problem(2, 50, 5);
        let n = x.nrows() as f64;
        let ym = stats::mean(&y);
        let lambda_max = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let cm = col.mean();
                col.iter().zip(&y).map(|(a, b)| (a - cm) * (b - ym)).sum::<f64>().abs() / n
            })
            .fold(0.0, f64::max);
        let fit = elastic_net(&x, &y, lambda_max, 1.0, 1e-10, 1000).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        assert!((fit.intercept - ym).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_design_matches_soft_threshold() {
        // Centred orthogonal columns with ||x_j||² = n.
        let n = 40;
        let mut rng = stats::rng(3);
        let raw = DMatrix::from_fn(n, 4, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
        let q = raw.qr().q();
        let x = q.columns(1, 3).into_owned() * (n as f64).sqrt();
        let y: Vec<f64> = (0..n).map(|i| 2.0 * x[(i, 0)] - 0.05 * x[(i, 1)] + 0.7 * x[(i, 2)] + 1.0).collect();
        let lambda = 0.3;
        let fit = elastic_net(&x, &y, lambda, 1.0, 1e-14, 100).unwrap();
        for j in 0..3 {
            let xty = x.column(j).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            assert!((fit.coefficients[j] - soft_threshold(xty, lambda)).abs() < 1e-10);
        }
        assert_eq!(fit.coefficients[1], 0.0);
    }

    #[test]
    fn max_iter_reports_not_converged() {
        let (x, y) = random_problem(4, 30, 6);
        let fit = elastic_net(&x, &y, 1e-6, 0.5, 0.0, 3).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.n_iterations, 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, mut y) = random_problem(5, 10, 2);
        assert!(elastic_net(&x, &y, -1.0, 0.5, 1e-8, 10).is_err());
        assert!(elastic_net(&x, &y, 0.1, 1.5, 1e-8, 10).is_err());
        y[0] = f64::NAN;
        assert!(elastic_net(&x, &y, 0.1, 0.5, 1e-8, 10).is_err());
    }

    #[test]
    fn selection_helpers() {
        let cols: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut fit = ElasticNetFit {
            coefficients: vec![0.0; 3],
            intercept: 0.0,
            lambda: 1.0,
            alpha_mix: 1.0,
            n_iterations: 1,
            converged: true,
            objective_trace: vec![],
        };
        assert!(select_features(&fit, &cols, 0.0).is_empty());
        fit.coefficients[1] = -0.2;
        assert_eq!(select_features(&fit, &cols, 0.0), ["b"]);
        assert!(select_features(&fit, &cols, 0.5).is_empty());
    }

    #[test]
    fn default_grid_shape() {
        let g = ElasticNetGrid::default();
        assert_eq!(g.lambdas.len(), 30);
        assert!((g.lambdas[0] - 1e-4).abs() < 1e-18);
        assert!((g.lambdas[29] - 10.0).abs() < 1e-12);
        assert_eq!(g.alphas.len(), 9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn objective_never_increases(seed in 0u64..10_000, lambda in 1e-4f64..1.0, alpha in 0.0f64..=1.0) {
            let (x, y) = random_problem(seed, 25, 5);
            let fit = elastic_net(&x, &y, lambda, alpha, 1e-12, 500).unwrap();
            let mut prev = {
                let ym = stats::mean(&y);
                let rss: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
                rss / (2.0 * y.len() as f64)
            };
            for &obj in &fit.objective_trace {
                prop_assert!(obj <= prev + 1e-12 * prev.abs().max(1.0));
                prev = obj;
            }
        }

        #[test]
        fn lasso_l1_norm_monotone_in_lambda(seed in 0u64..10_000, hi in 0.05f64..2.0, ratio in 0.01f64..0.99) {
            let (x, y) = random_problem(seed, 30, 4);
            let big = elastic_net(&x, &y, hi, 1.0, 1e-13, 100_000).unwrap();
            let small = elastic_net(&x, &y, hi * ratio, 1.0, 1e-13, 100_000).unwrap();
            prop_assert!(big.l1_norm() <= small.l1_norm() + 1e-9);
        }
    }
}
