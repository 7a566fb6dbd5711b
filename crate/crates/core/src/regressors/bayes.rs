//! Bayesian ridge and automatic relevance determination.
//!
//! Both share the Gaussian posterior
//! `Σ = (diag(λ) + α XᵀX)⁻¹`, `μ = α Σ Xᵀy`;
//! ridge ties every `λ_j` together, ARD learns them by evidence updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::linear::{center, check_xy};
use crate::error::{Error, Result};
use crate::stats;

pub const PRECISION_MIN: f64 = 1e-6;
pub const PRECISION_MAX: f64 = 1e3;
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesianLinearModel {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Noise precision in target units.
    pub alpha: f64,
    /// Prior precisions in target units.
    pub lambdas: Vec<f64>,
    pub x_offset: Vec<f64>,
    pub y_offset: f64,
    pub intercept: f64,
    /// Coefficients whose precision reached the upper clamp (ARD).
    pub pruned: Vec<bool>,
    pub converged: bool,
    pub n_iter: usize,
}

impl BayesianLinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| self.intercept + self.mean.iter().enumerate().map(|(j, w)| w * x[(i, j)]).sum::<f64>())
            .collect()
    }

    /// `xᵀΣx + 1/α` on the centered row.
    pub fn predictive_variance(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let v = DVector::from_fn(x.ncols(), |j, _| x[(i, j)] - self.x_offset[j]);
                (v.transpose() * &self.covariance * &v)[(0, 0)] + 1.0 / self.alpha
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Posterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub condition: f64,
}

/// Posterior for fixed precisions on an already-centered design.
pub fn posterior(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64, lambdas: &[f64]) -> Result<Posterior> {
    let p = x.ncols();
    let mut a = x.transpose() * x * alpha;
    for j in 0..p {
        a[(j, j)] += lambdas[j];
    }
    let eig = SymmetricEigen::new(a.clone());
    let (mut lo, mut hi, mut lo_idx) = (f64::INFINITY, 0.0f64, 0);
    for (k, &v) in eig.eigenvalues.iter().enumerate() {
        if v < lo {
            lo = v;
            lo_idx = k;
        }
        hi = hi.max(v);
    }
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        let v = eig.eigenvectors.column(lo_idx);
        let columns = (0..p).filter(|&j| v[j].abs() > 0.1).collect();
        return Err(Error::IllConditioned { condition, columns });
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::IllConditioned { condition, columns: (0..p).collect() })?;
    let mean = chol.solve(&(x.transpose() * y * alpha));
    let covariance = chol.inverse();
    Ok(Posterior {
        mean,
        covariance,
        condition,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesRidgeParams {
    pub alpha: f64,
    pub lambda: f64,
    pub fit_intercept: bool,
}

impl Default for BayesRidgeParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lambda: 1.0,
            fit_intercept: true,
        }
    }
}

fn check_precision(name: &str, v: f64) -> Result<()> {
    if (PRECISION_MIN..=PRECISION_MAX).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} outside [{PRECISION_MIN}, {PRECISION_MAX}]")))
    }
}

fn assemble(
    post: Posterior,
    alpha: f64,
    lambdas: Vec<f64>,
    x_offset: Vec<f64>,
    y_offset: f64,
    pruned: Vec<bool>,
    converged: bool,
    n_iter: usize,
) -> BayesianLinearModel {
    let mean: Vec<f64> = post.mean.iter().copied().collect();
    let intercept = y_offset - mean.iter().zip(&x_offset).map(|(w, m)| w * m).sum::<f64>();
    BayesianLinearModel {
        mean,
        covariance: post.covariance,
        alpha,
        lambdas,
        x_offset,
        y_offset,
        intercept,
        pruned,
        converged,
        n_iter,
    }
}

/// Bayesian ridge with fixed noise precision `α` and shared prior precision `λ`.
pub fn fit_bayesian_ridge(x: &DMatrix<f64>, y: &[f64], params: &BayesRidgeParams) -> Result<BayesianLinearModel> {
    check_xy(x, y)?;
    check_precision("alpha", params.alpha)?;
    check_precision("lambda", params.lambda)?;
    let (x_offset, y_offset, xc, yc) = center(x, y, params.fit_intercept);
    let lambdas = vec![params.lambda; x.ncols()];
    let post = posterior(&xc, &yc, params.alpha, &lambdas)?;
    let pruned = vec![false; x.ncols()];
    Ok(assemble(post, params.alpha, lambdas, x_offset, y_offset, pruned, true, 0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArdParams {
    pub init_alpha: f64,
    pub init_lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub fit_intercept: bool,
    /// Scale the target to unit variance before the evidence updates so the
    /// precision clamps mean the same thing for any target scale.
    pub normalize_target: bool,
}

impl Default for ArdParams {
    fn default() -> Self {
        Self {
            init_alpha: 1.0,
            init_lambda: 1.0,
            max_iter: 300,
            tol: 1e-4,
            fit_intercept: true,
            normalize_target: true,
        }
    }
}

/// ARD by evidence maximization:
/// `λ_j ← (1 − λ_j Σ_jj)/μ_j²` clamped to `[1e-6, 1e3]`,
/// `α ← (n − Σ_j(1 − λ_j Σ_jj)) / ‖y − Xμ‖²`,
/// until the largest relative change drops below `tol`. `max_iter = 0`
/// returns the posterior at the initial precisions.
pub fn fit_ard(x: &DMatrix<f64>, y: &[f64], params: &ArdParams) -> Result<BayesianLinearModel> {
    check_xy(x, y)?;
    check_precision("init_alpha", params.init_alpha)?;
    check_precision("init_lambda", params.init_lambda)?;
    let (n, p) = x.shape();
    let (x_offset, y_offset, xc, mut yc) = center(x, y, params.fit_intercept);
    let scale = if params.normalize_target && n > 1 {
        let s = stats::sample_std(yc.as_slice());
        if s > 0.0 {
            s
        } else {
            1.0
        }
    } else {
        1.0
    };
    yc /= scale;

    let mut alpha = params.init_alpha;
    let mut lambdas = vec![params.init_lambda; p];
    let mut post = posterior(&xc, &yc, alpha, &lambdas)?;
    let mut converged = params.max_iter == 0;
    let mut n_iter = 0;
    while n_iter < params.max_iter {
        n_iter += 1;
        let mut gamma_sum = 0.0;
        let mut change = 0.0f64;
        let new_lambdas: Vec<f64> = (0..p)
            .map(|j| {
                let gamma = (1.0 - lambdas[j] * post.covariance[(j, j)]).clamp(0.0, 1.0);
                gamma_sum += gamma;
                let mu2 = post.mean[j] * post.mean[j];
                let l = if mu2 > 0.0 { gamma / mu2 } else { PRECISION_MAX };
                let l = l.clamp(PRECISION_MIN, PRECISION_MAX);
                change = change.max((l - lambdas[j]).abs() / lambdas[j]);
                l
            })
            .collect();
        let resid = &yc - &xc * &post.mean;
        let rss = resid.norm_squared().max(f64::MIN_POSITIVE);
        let new_alpha = ((n as f64 - gamma_sum).max(1e-12) / rss).clamp(PRECISION_MIN, 1e12);
        change = change.max((new_alpha - alpha).abs() / alpha);
        alpha = new_alpha;
        lambdas = new_lambdas;
        post = posterior(&xc, &yc, alpha, &lambdas)?;
        if change < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("ARD stopped after {n_iter} iterations without converging");
    }

    let pruned: Vec<bool> = lambdas.iter().map(|&l| l >= PRECISION_MAX).collect();
    // Back to target units: μ scales by s, precisions by 1/s².
    let s2 = scale * scale;
    post.mean *= scale;
    post.covariance *= s2;
    let lambdas = lambdas.iter().map(|l| l / s2).collect();
    Ok(assemble(post, alpha / s2, lambdas, x_offset, y_offset, pruned, converged, n_iter))
}
