use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClimateSeries, TrancheRecord, YearMonth, MAX_LAG_MONTHS};
use crate::error::{Error, Result};
use crate::stats;

/// Value of `series` at each tranche's issuance month shifted back by `lag`.
pub fn lag_join(tranches: &[TrancheRecord], series: &ClimateSeries, lag: u32) -> Result<Vec<f64>> {
    if lag > MAX_LAG_MONTHS {
        return Err(Error::invalid(format!("lag {lag} exceeds {MAX_LAG_MONTHS} months")));
    }
    tranches
        .iter()
        .map(|t| {
            let ym = YearMonth::of(t.issue_date).minus_months(lag);
            series.get(ym).ok_or_else(|| Error::Unresolvable {
                series: series.name().to_string(),
                year: ym.year,
                month: ym.month,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagCorrelation {
    pub lag: u32,
    /// `None` when either vector has zero variance at this lag.
    pub correlation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagCorrelationTable {
    pub index: String,
    pub lag_min: u32,
    pub lag_max: u32,
    pub entries: Vec<LagCorrelation>,
}

impl LagCorrelationTable {
    pub fn get(&self, lag: u32) -> Option<f64> {
        self.entries.iter().find(|e| e.lag == lag).and_then(|e| e.correlation)
    }

    pub fn undefined_lags(&self) -> Vec<u32> {
        self.entries.iter().filter(|e| e.correlation.is_none()).map(|e| e.lag).collect()
    }

    /// Lag with the largest absolute correlation, ties to the smaller lag.
    pub fn peak(&self) -> Option<(u32, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.correlation.map(|c| (e.lag, c)))
            .fold(None, |best, (lag, c)| match best {
                Some((_, b)) if c.abs() <= f64::abs(b) => best,
                _ => Some((lag, c)),
            })
    }

    /// Rows `index,lag,correlation`; undefined lags print `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,lag,correlation\n");
        self.append_csv_rows(&mut out);
        out
    }

    pub fn append_csv_rows(&self, out: &mut String) {
        for e in &self.entries {
            match e.correlation {
                Some(c) => writeln!(out, "{},{},{}", self.index, e.lag, c).unwrap(),
                None => writeln!(out, "{},{},NA", self.index, e.lag).unwrap(),
            }
        }
    }
}

/// Pearson correlation of coupons with the lagged series for every lag in
/// `[lag_min, lag_max]`.
pub fn lagged_correlations(
    tranches: &[TrancheRecord],
    series: &ClimateSeries,
    lag_min: u32,
    lag_max: u32,
) -> Result<LagCorrelationTable> {
    if tranches.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 tranches, got {}", tranches.len())));
    }
    if lag_min > lag_max {
        return Err(Error::invalid(format!("lag range {lag_min}..{lag_max} is empty")));
    }
    let target: Vec<f64> = tranches.iter().map(|t| t.final_spread).collect();
    let entries = (lag_min..=lag_max)
        .map(|lag| {
            let x = lag_join(tranches, series, lag)?;
            Ok(LagCorrelation {
                lag,
                correlation: stats::pearson(&target, &x),
            })
        })
        .collect::<Result<_>>()?;
    Ok(LagCorrelationTable {
        index: series.name().to_string(),
        lag_min,
        lag_max,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, YearMonth};
    use chrono::NaiveDate;

    fn tranches_on(dates: &[(i32, u32)], spreads: &[f64]) -> Vec<TrancheRecord> {
        let template = generate_synthetic(1, 50).unwrap().dataset.tranches()[0].clone();
        dates
            .iter()
            .zip(spreads)
            .map(|(&(y, m), &s)| TrancheRecord {
                issue_date: NaiveDate::from_ymd_opt(y, m, 15).unwrap(),
                final_spread: s,
                ..template.clone()
            })
            .collect()
    }

    fn year_series() -> ClimateSeries {
        let start = YearMonth::new(1990, 1);
        let values = (0..240).map(|i| start.plus_months(i).year as f64).collect();
        ClimateSeries::new("YEAR", start, values).unwrap()
    }

    #[test]
    fn lag_zero_is_issue_month() {
        let ts = tranches_on(&[(2000, 1), (2003, 7)], &[0.05, 0.06]);
        assert_eq!(lag_join(&ts, &year_series(), 0).unwrap(), [2000.0, 2003.0]);
    }

    #[test]
    fn lag_twelve_on_january_is_previous_year() {
        let ts = tranches_on(&[(2000, 1), (2005, 1)], &[0.05, 0.06]);
        assert_eq!(lag_join(&ts, &year_series(), 12).unwrap(), [1999.0, 2004.0]);
    }

    #[test]
    fn lag_fifteen_matches_hand_shift() {
        // Series value i at month i; the three issues sit at offsets 20, 31, 47.
        let start = YearMonth::new(2000, 1);
        let series = ClimateSeries::new("S", start, (0..60).map(f64::from).collect()).unwrap();
        let ts = tranches_on(&[(2001, 9), (2002, 8), (2003, 12)], &[0.1, 0.2, 0.3]);
        let hand = [20.0 - 15.0, 31.0 - 15.0, 47.0 - 15.0];
        assert_eq!(lag_join(&ts, &series, 15).unwrap(), hand);
    }

    #[test]
    fn unresolvable_and_out_of_range_lags() {
        let start = YearMonth::new(2000, 1);
        let series = ClimateSeries::new("S", start, vec![0.0; 24]).unwrap();
        let ts = tranches_on(&[(2000, 6)], &[0.1]);
        assert!(matches!(lag_join(&ts, &series, 6), Err(Error::Unresolvable { .. })));
        assert!(lag_join(&ts, &series, 19).is_err());
    }

    #[test]
    fn perfect_and_inverse_correlation() {
        let start = YearMonth::new(2000, 1);
        let values: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 * 0.01).collect();
        let series = ClimateSeries::new("S", start, values.clone()).unwrap();
        let dates = [(2002, 1), (2002, 3), (2002, 8), (2002, 11), (2003, 2)];
        let lagged: Vec<f64> = dates
            .iter()
            .map(|&(y, m)| series.get(YearMonth::new(y, m).minus_months(4)).unwrap())
            .collect();
        let ts = tranches_on(&dates, &lagged);
        let table = lagged_correlations(&ts, &series, 2, 6).unwrap();
        assert!((table.get(4).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = lagged.iter().map(|v| -v).collect();
        let ts = tranches_on(&dates, &neg);
        let table = lagged_correlations(&ts, &series, 2, 6).unwrap();
        assert!((table.get(4).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn five_point_textbook_pearson() {
        let start = YearMonth::new(2000, 1);
        let values = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let series = ClimateSeries::new("S", start, values.clone()).unwrap();
        let dates = [(2000, 1), (2000, 2), (2000, 3), (2000, 4), (2000, 5)];
        let spreads = [0.05, 0.09, 0.04, 0.12, 0.07];
        let ts = tranches_on(&dates, &spreads);
        // cov / (sx sy) with explicit sums.
        let n = 5.0;
        let mx = values.iter().sum::<f64>() / n;
        let my = spreads.iter().sum::<f64>() / n;
        let cov: f64 = values.iter().zip(&spreads).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0);
        let sx = (values.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sy = (spreads.iter().map(|y| (y - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let table = lagged_correlations(&ts, &series, 0, 0).unwrap();
        assert!((table.get(0).unwrap() - cov / (sx * sy)).abs() < 1e-12);
    }

    #[test]
    fn constant_series_flagged_undefined() {
        let series = ClimateSeries::new("C", YearMonth::new(1999, 1), vec![1.5; 60]).unwrap();
        let ts = tranches_on(&[(2001, 1), (2001, 5), (2002, 2)], &[0.1, 0.2, 0.15]);
        let table = lagged_correlations(&ts, &series, 0, 3).unwrap();
        assert_eq!(table.undefined_lags(), vec![0, 1, 2, 3]);
        assert!(table.to_csv().contains("C,2,NA"));
        assert!(table.peak().is_none());
    }

    #[test]
    fn too_few_tranches() {
        let ts = tranches_on(&[(2001, 1), (2001, 5)], &[0.1, 0.2]);
        assert!(lagged_correlations(&ts, &year_series(), 0, 2).is_err());
    }
}
