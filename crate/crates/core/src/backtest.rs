//! Value-at-Risk backtests: exceedances, Kupiec and Christoffersen
//! likelihood ratios, chi-square p-values and traffic-light zones.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSeries {
    pub hits: Vec<bool>,
}

impl ExceedanceSeries {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.hits.iter().filter(|&&h| h).count()
    }
}

/// `y_true[i] < var[i]`; ties are not breaches.
pub fn exceedances(y_true: &[f64], var_forecasts: &[f64]) -> Result<ExceedanceSeries> {
    if y_true.len() != var_forecasts.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: var_forecasts.len() });
    }
    Ok(ExceedanceSeries {
        hits: y_true.iter().zip(var_forecasts).map(|(y, v)| y < v).collect(),
    })
}

/// `k·ln(q)` with `0·ln 0 = 0`.
fn xlogy(k: f64, q: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * q.ln()
    }
}

fn check_counts(n: usize, x: usize, p: f64) -> Result<()> {
    if n == 0 || x > n {
        return Err(Error::invalid(format!("need 0 <= x <= N and N >= 1, got N={n}, x={x}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("coverage level {p} outside (0, 1)")));
    }
    Ok(())
}

/// Kupiec unconditional coverage statistic.
pub fn kupiec_lruc(n: usize, x: usize, p: f64) -> Result<f64> {
    check_counts(n, x, p)?;
    let (nf, xf) = (n as f64, x as f64);
    let pi = xf / nf;
    let null = xlogy(nf - xf, 1.0 - p) + xlogy(xf, p);
    let alt = xlogy(nf - xf, 1.0 - pi) + xlogy(xf, pi);
    Ok((-2.0 * (null - alt)).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub n00: usize,
    pub n01: usize,
    pub n10: usize,
    pub n11: usize,
}

pub fn transition_counts(series: &ExceedanceSeries) -> TransitionCounts {
    let mut c = TransitionCounts { n00: 0, n01: 0, n10: 0, n11: 0 };
    for w in series.hits.windows(2) {
        match (w[0], w[1]) {
            (false, false) => c.n00 += 1,
            (false, true) => c.n01 += 1,
            (true, false) => c.n10 += 1,
            (true, true) => c.n11 += 1,
        }
    }
    c
}

/// Christoffersen independence statistic. A state with no outgoing
/// transitions contributes nothing to the alternative likelihood.
pub fn christoffersen_lrind(series: &ExceedanceSeries) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 observations, got {}", series.len())));
    }
    let c = transition_counts(series);
    let (n00, n01, n10, n11) = (c.n00 as f64, c.n01 as f64, c.n10 as f64, c.n11 as f64);
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let null = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
    let mut alt = 0.0;
    if n00 + n01 > 0.0 {
        let pi01 = n01 / (n00 + n01);
        alt += xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01);
    }
    if n10 + n11 > 0.0 {
        let pi11 = n11 / (n10 + n11);
        alt += xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
    }
    Ok((-2.0 * (null - alt)).max(0.0))
}

pub fn lrcc(lruc: f64, lrind: f64) -> f64 {
    lruc + lrind
}

/// Chi-square survival function for 1 or 2 degrees of freedom.
pub fn chi2_sf(stat: f64, dof: u32) -> Result<f64> {
    if !(stat >= 0.0) {
        return Err(Error::invalid(format!("chi-square statistic {stat} must be non-negative")));
    }
    match dof {
        1 => Ok(erfc((stat / 2.0).sqrt())),
        2 => Ok((-stat / 2.0).exp()),
        _ => Err(Error::invalid(format!("chi-square dof {dof} not in {{1, 2}}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselZone {
    Green,
    Yellow,
    Red,
}

impl BaselZone {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselZone::Green => "green",
            BaselZone::Yellow => "yellow",
            BaselZone::Red => "red",
        }
    }
}

impl fmt::Display for BaselZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `P(X <= x)` for `X ~ Binomial(n, p)`, summed in log space.
pub fn binomial_cdf(n: usize, x: usize, p: f64) -> f64 {
    let ln_fact = |k: usize| ln_gamma(k as f64 + 1.0);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let total: f64 = (0..=x.min(n))
        .map(|k| (ln_fact(n) - ln_fact(k) - ln_fact(n - k) + k as f64 * lp + (n - k) as f64 * lq).exp())
        .sum();
    total.min(1.0)
}

pub const GREEN_LIMIT: f64 = 0.95;
pub const YELLOW_LIMIT: f64 = 0.9999;

pub fn basel_zone(n: usize, x: usize, p: f64) -> Result<BaselZone> {
    check_counts(n, x, p)?;
    let cdf = binomial_cdf(n, x, p);
    Ok(if cdf <= GREEN_LIMIT {
        BaselZone::Green
    } else if cdf <= YELLOW_LIMIT {
        BaselZone::Yellow
    } else {
        BaselZone::Red
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub n: usize,
    pub x: usize,
    pub coverage: f64,
    pub failure_rate: f64,
    pub lruc: f64,
    pub lrind: f64,
    pub lrcc: f64,
    pub p_lruc: f64,
    pub p_lrind: f64,
    pub p_lrcc: f64,
    pub basel_zone: BaselZone,
}

pub const CSV_HEADER: &str = "label,n,x,failure_rate,lruc,p_lruc,lrind,p_lrind,lrcc,p_lrcc,basel_zone";

impl BacktestReport {
    pub fn from_series(series: &ExceedanceSeries, coverage: f64) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::EmptyInput);
        }
        let (n, x) = (series.len(), series.count());
        let lruc = kupiec_lruc(n, x, coverage)?;
        let lrind = christoffersen_lrind(series)?;
        let lrcc = lrcc(lruc, lrind);
        debug_assert!((lrcc - (lruc + lrind)).abs() <= 1e-9);
        Ok(Self {
            n,
            x,
            coverage,
            failure_rate: x as f64 / n as f64,
            lruc,
            lrind,
            lrcc,
            p_lruc: chi2_sf(lruc, 1)?,
            p_lrind: chi2_sf(lrind, 1)?,
            p_lrcc: chi2_sf(lrcc, 2)?,
            basel_zone: basel_zone(n, x, coverage)?,
        })
    }

    /// Flat `key = value` block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("n", self.n.to_string()),
            ("x", self.x.to_string()),
            ("coverage", self.coverage.to_string()),
            ("failure_rate", format!("{:.6}", self.failure_rate)),
            ("lruc", format!("{:.6}", self.lruc)),
            ("p_lruc", format!("{:.6}", self.p_lruc)),
            ("lrind", format!("{:.6}", self.lrind)),
            ("p_lrind", format!("{:.6}", self.p_lrind)),
            ("lrcc", format!("{:.6}", self.lrcc)),
            ("p_lrcc", format!("{:.6}", self.p_lrcc)),
            ("basel_zone", self.basel_zone.to_string()),
        ] {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    pub fn csv_row(&self, label: &str) -> String {
        format!(
            "{label},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.n,
            self.x,
            self.failure_rate,
            self.lruc,
            self.p_lruc,
            self.lrind,
            self.p_lrind,
            self.lrcc,
            self.p_lrcc,
            self.basel_zone
        )
    }
}
