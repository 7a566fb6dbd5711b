//! Evaluation protocol: 80:10:10 split, point metrics, residual
//! calibration and Monte Carlo predictive distributions.

use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalLaw};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Rows are assumed date-sorted: earliest 80% train, then calibration,
    /// then test.
    Chronological,
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
}

pub const MIN_SPLIT_ROWS: usize = 30;

/// Calibration and test get `floor(n/10)` rows each, train the rest.
pub fn split_80_10_10(n: usize, mode: SplitMode) -> Result<SplitIndices> {
    if n < MIN_SPLIT_ROWS {
        return Err(Error::invalid(format!("need at least {MIN_SPLIT_ROWS} rows to split, got {n}")));
    }
    let tenth = n / 10;
    let n_train = n - 2 * tenth;
    let mut order: Vec<usize> = (0..n).collect();
    if let SplitMode::Random { seed } = mode {
        order.shuffle(&mut stats::rng(seed));
    }
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitIndices {
        train: sorted(&order[..n_train]),
        calibration: sorted(&order[n_train..n_train + tenth]),
        test: sorted(&order[n_train + tenth..]),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when `y_true` is constant.
    pub r2: Option<f64>,
}

pub fn point_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<PointMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = y_true.len() as f64;
    let (mut sse, mut sae) = (0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        sse += (t - p) * (t - p);
        sae += (t - p).abs();
    }
    let mse = sse / n;
    let m = stats::mean(y_true);
    let sst: f64 = y_true.iter().map(|t| (t - m).powi(2)).sum();
    Ok(PointMetrics {
        mse,
        mae: sae / n,
        rmse: mse.sqrt(),
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

pub const DEFAULT_QUANTILES: [f64; 3] = [0.05, 0.5, 0.95];
pub const MIN_CALIBRATION_RESIDUALS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualCalibration {
    pub residuals: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// `(probability, empirical quantile)` pairs, ascending.
    pub quantiles: Vec<(f64, f64)>,
}

impl ResidualCalibration {
    pub fn empirical_quantile(&self, prob: f64) -> f64 {
        let mut sorted = self.residuals.clone();
        stats::sort_floats(&mut sorted);
        stats::quantile_sorted(&sorted, prob)
    }
}

/// Normal fit (sample mean, `n − 1` std) and empirical quantiles of the
/// calibration residuals `y − ŷ`.
pub fn calibrate(residuals: &[f64], probabilities: &[f64]) -> Result<ResidualCalibration> {
    if residuals.len() < MIN_CALIBRATION_RESIDUALS {
        return Err(Error::invalid(format!(
            "need at least {MIN_CALIBRATION_RESIDUALS} residuals, got {}",
            residuals.len()
        )));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("non-finite residual"));
    }
    let std = stats::sample_std(residuals);
    if residuals.iter().all(|&r| r == residuals[0]) || !(std > 0.0) {
        return Err(Error::invalid("residuals are all equal; error spread is zero"));
    }
    let mut probs = probabilities.to_vec();
    probs.sort_by(|a, b| a.total_cmp(b));
    let mut sorted = residuals.to_vec();
    stats::sort_floats(&mut sorted);
    Ok(ResidualCalibration {
        residuals: residuals.to_vec(),
        mean: stats::mean(residuals),
        std,
        quantiles: probs.iter().map(|&p| (p, stats::quantile_sorted(&sorted, p))).collect(),
    })
}

pub const DEFAULT_DRAWS: usize = 1000;
pub const MIN_DRAWS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveRow {
    pub point: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub rows: Vec<PredictiveRow>,
    /// Simulated outcomes per row, kept only on request.
    pub samples: Option<Vec<Vec<f64>>>,
}

/// Per row: `point + ε` with `ε ~ N(μ_e, σ_e²)`, `n_draws` times, summarized
/// by percentiles. Row `i` draws from stream `(seed, i)`.
pub fn predictive_distribution(
    points: &[f64],
    calib: &ResidualCalibration,
    n_draws: usize,
    seed: u64,
    keep_samples: bool,
) -> Result<PredictiveDistribution> {
    if n_draws < MIN_DRAWS {
        return Err(Error::invalid(format!("n_draws {n_draws} below {MIN_DRAWS}")));
    }
    if !(calib.std > 0.0) {
        return Err(Error::invalid("calibration spread must be positive"));
    }
    let law = Normal::new(calib.mean, calib.std).map_err(|e| Error::invalid(e.to_string()))?;
    let simulated: Vec<(PredictiveRow, Vec<f64>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, &point)| {
            let mut rng = stats::task_rng(seed, i as u64);
            let mut draws: Vec<f64> = (0..n_draws).map(|_| point + law.sample(&mut rng)).collect();
            stats::sort_floats(&mut draws);
            let row = PredictiveRow {
                point,
                p5: stats::quantile_sorted(&draws, 0.05),
                p50: stats::quantile_sorted(&draws, 0.5),
                p95: stats::quantile_sorted(&draws, 0.95),
            };
            (row, draws)
        })
        .collect();
    let (rows, samples): (Vec<_>, Vec<_>) = simulated.into_iter().unzip();
    Ok(PredictiveDistribution {
        rows,
        samples: keep_samples.then_some(samples),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarMode {
    /// 5th percentile of the simulated predictive sample.
    Simulated,
    /// Point forecast plus the calibration-window 5% order statistic.
    Empirical,
    /// Point forecast plus the 5% quantile of the fitted normal.
    Analytic,
}

pub fn var_forecasts(
    pred: &PredictiveDistribution,
    calib: &ResidualCalibration,
    mode: VarMode,
    level: f64,
) -> Vec<f64> {
    match mode {
        VarMode::Simulated => pred.rows.iter().map(|r| r.p5).collect(),
        VarMode::Empirical => {
            let q = calib.empirical_quantile(level);
            pred.rows.iter().map(|r| r.point + q).collect()
        }
        VarMode::Analytic => {
            let q = NormalLaw::new(calib.mean, calib.std).expect("positive spread").inverse_cdf(level);
            pred.rows.iter().map(|r| r.point + q).collect()
        }
    }
}

/// `row_id,date,y_true,point,p5,p50,p95`.
pub fn predictive_csv(ids: &[usize], dates: &[NaiveDate], y_true: &[f64], pred: &PredictiveDistribution) -> String {
    let mut out = String::from("row_id,date,y_true,point,p5,p50,p95\n");
    for (k, row) in pred.rows.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            ids[k], dates[k], y_true[k], row.point, row.p5, row.p50, row.p95
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct PredictiveRecord {
    pub row_id: usize,
    pub date: NaiveDate,
    pub y_true: f64,
    pub point: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

pub fn parse_predictive_csv(text: &str) -> Result<Vec<PredictiveRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::MalformedRow {
                row: i + 1,
                field: "predictive".into(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_sizes() {
        let s = split_80_10_10(100, SplitMode::Chronological).unwrap();
        assert_eq!((s.train.len(), s.calibration.len(), s.test.len()), (80, 10, 10));
        let s = split_80_10_10(734, SplitMode::Chronological).unwrap();
        assert_eq!((s.train.len(), s.calibration.len(), s.test.len()), (588, 73, 73));
        assert_eq!(s.train.last(), Some(&587));
        assert_eq!(s.calibration.first(), Some(&588));
        assert!(split_80_10_10(29, SplitMode::Chronological).is_err());
    }

    #[test]
    fn random_split_is_seeded() {
        let a = split_80_10_10(200, SplitMode::Random { seed: 4 }).unwrap();
        assert_eq!(a, split_80_10_10(200, SplitMode::Random { seed: 4 }).unwrap());
        assert_ne!(a, split_80_10_10(200, SplitMode::Random { seed: 5 }).unwrap());
    }

    #[test]
    fn reference_rmse_pairs() {
        // Printed values are truncated to five decimals.
        for (mse, printed, six) in [(0.000315f64, 0.01774, 0.017748), (0.000283f64, 0.01682, 0.016823)] {
            let m = point_metrics(&[mse.sqrt()], &[0.0]).unwrap();
            assert!((m.mse - mse).abs() < 1e-18);
            assert_eq!((m.rmse * 1e5).floor() / 1e5, printed);
            assert!((m.rmse - six).abs() < 5e-7);
        }
    }

    #[test]
    fn perfect_forecast_metrics() {
        let y = [0.1, 0.2, 0.4];
        let m = point_metrics(&y, &y).unwrap();
        assert_eq!((m.mse, m.mae, m.rmse, m.r2), (0.0, 0.0, 0.0, Some(1.0)));
        assert!(point_metrics(&[0.1, 0.1], &[0.2, 0.0]).unwrap().r2.is_none());
        assert!(point_metrics(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn calibration_basics() {
        let c = calibrate(&[-1.0, 0.0, 1.0], &DEFAULT_QUANTILES).unwrap();
        assert_eq!((c.mean, c.std), (0.0, 1.0));
        assert_eq!(c.quantiles[1], (0.5, 0.0));
        assert!(calibrate(&[0.2; 6], &DEFAULT_QUANTILES).is_err());
        assert!(calibrate(&[0.2, 0.3], &DEFAULT_QUANTILES).is_err());
    }

    #[test]
    fn calibration_recovers_known_normal() {
        let law = Normal::new(0.3, 2.0).unwrap();
        let mut rng = stats::rng(12);
        let r: Vec<f64> = (0..20).map(|_| law.sample(&mut rng)).collect();
        let c = calibrate(&r, &DEFAULT_QUANTILES).unwrap();
        let se_mean = 2.0 / 20f64.sqrt();
        let se_std = 2.0 / (2.0 * 19.0f64).sqrt();
        assert!((c.mean - 0.3).abs() < 3.0 * se_mean);
        assert!((c.std - 2.0).abs() < 3.0 * se_std);
    }

    #[test]
    fn tiny_spread_collapses_percentiles() {
        let c = ResidualCalibration { residuals: vec![0.0], mean: 0.01, std: 1e-12, quantiles: vec![] };
        let d = predictive_distribution(&[0.05, 0.1], &c, 500, 1, false).unwrap();
        for r in &d.rows {
            for p in [r.p5, r.p50, r.p95] {
                assert!((p - (r.point + 0.01)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn width_matches_normal_quantiles() {
        let c = ResidualCalibration { residuals: vec![0.0], mean: 0.0, std: 0.5, quantiles: vec![] };
        let d = predictive_distribution(&[1.0], &c, 200_000, 3, false).unwrap();
        let width = (d.rows[0].p95 - d.rows[0].p5) / 0.5;
        assert!((width / 3.29 - 1.0).abs() < 0.05);
        assert!(predictive_distribution(&[1.0], &c, 99, 3, false).is_err());
    }

    #[test]
    fn var_modes() {
        let c = calibrate(&[-0.02, -0.01, 0.0, 0.01, 0.02, 0.005], &DEFAULT_QUANTILES).unwrap();
        let d = predictive_distribution(&[0.1, 0.2], &c, 1000, 9, false).unwrap();
        let sim = var_forecasts(&d, &c, VarMode::Simulated, 0.05);
        assert_eq!(sim, vec![d.rows[0].p5, d.rows[1].p5]);
        let emp = var_forecasts(&d, &c, VarMode::Empirical, 0.05);
        assert!((emp[1] - emp[0] - 0.1).abs() < 1e-12);
        let ana = var_forecasts(&d, &c, VarMode::Analytic, 0.05);
        assert!((ana[0] - (0.1 + c.mean - 1.6448536269514722 * c.std)).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let c = calibrate(&[-0.02, -0.01, 0.0, 0.01, 0.02], &DEFAULT_QUANTILES).unwrap();
        let d = predictive_distribution(&[0.1, 0.2], &c, 100, 9, false).unwrap();
        let dates = [NaiveDate::from_ymd_opt(2019, 1, 2).unwrap(), NaiveDate::from_ymd_opt(2020, 3, 4).unwrap()];
        let text = predictive_csv(&[7, 8], &dates, &[0.11, 0.19], &d);
        let back = parse_predictive_csv(&text).unwrap();
        assert_eq!(back[1].row_id, 8);
        assert_eq!(back[1].p5, d.rows[1].p5);
        assert_eq!(back[0].date, dates[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rmse_is_sqrt_mse(pairs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..50)) {
            let (t, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = point_metrics(&t, &p).unwrap();
            prop_assert_eq!(m.rmse, m.mse.sqrt());
        }

        #[test]
        fn percentiles_ordered_and_shift_equivariant(
            points in prop::collection::vec(-0.5f64..0.5, 1..6),
            shift in -0.25f64..0.25,
            seed in 0u64..1000,
        ) {
            let c = ResidualCalibration { residuals: vec![0.0], mean: 0.001, std: 0.02, quantiles: vec![] };
            let base = predictive_distribution(&points, &c, 200, seed, false).unwrap();
            let moved: Vec<f64> = points.iter().map(|p| p + shift).collect();
            let shifted = predictive_distribution(&moved, &c, 200, seed, false).unwrap();
            for (a, b) in base.rows.iter().zip(&shifted.rows) {
                prop_assert!(a.p5 <= a.p50 && a.p50 <= a.p95);
                prop_assert!((b.p5 - a.p5 - shift).abs() < 1e-12);
                prop_assert!((b.p95 - a.p95 - shift).abs() < 1e-12);
            }
        }

        #[test]
        fn split_partitions(n in 30usize..400, seed in prop::option::of(0u64..50)) {
            let mode = seed.map_or(SplitMode::Chronological, |seed| SplitMode::Random { seed });
            let s = split_80_10_10(n, mode).unwrap();
            let mut all = [s.train.clone(), s.calibration.clone(), s.test.clone()].concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!((s.calibration.len() as f64 - n as f64 * 0.1).abs() < 1.0);
            prop_assert!((s.train.len() as f64 - n as f64 * 0.8).abs() <= 2.0);
        }
    }
}
