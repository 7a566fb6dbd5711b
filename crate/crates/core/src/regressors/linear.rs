use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsParams {
    pub fit_intercept: bool,
}

impl Default for OlsParams {
    fn default() -> Self {
        Self { fit_intercept: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| self.intercept + self.weights.iter().enumerate().map(|(j, w)| w * x[(i, j)]).sum::<f64>())
            .collect()
    }
}

pub(crate) fn check_xy(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    Ok(())
}

/// Column means (or zeros) and the centered design and target.
pub(crate) fn center(x: &DMatrix<f64>, y: &[f64], on: bool) -> (Vec<f64>, f64, DMatrix<f64>, DVector<f64>) {
    let n = x.nrows() as f64;
    let x_mean: Vec<f64> = (0..x.ncols())
        .map(|j| if on { x.column(j).sum() / n } else { 0.0 })
        .collect();
    let y_mean = if on { y.iter().sum::<f64>() / n } else { 0.0 };
    let xc = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - x_mean[j]);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    (x_mean, y_mean, xc, yc)
}

/// Least squares by SVD. A rank-deficient design yields the minimum-norm
/// solution and a logged warning.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64], params: &OlsParams) -> Result<LinearModel> {
    check_xy(x, y)?;
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::invalid(format!("OLS needs more rows than columns, got {n} x {p}")));
    }
    let (x_mean, y_mean, xc, yc) = center(x, y, params.fit_intercept);
    let svd = xc.svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * n.max(p) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let w = svd.solve(&yc, tol).map_err(Error::invalid)?;
    let rank_deficient = rank < p;
    if rank_deficient {
        log::warn!("design matrix has rank {rank} < {p}; returning the minimum-norm solution");
    }
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel {
        weights,
        intercept,
        rank,
        rank_deficient,
    })
}
