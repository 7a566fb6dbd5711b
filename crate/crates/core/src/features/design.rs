//! Benchmark and extended design matrices.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lag::lag_join;
use crate::dataset::{Dataset, PerilType, Territory, TrancheRecord, YearMonth};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    Benchmark,
    Extended,
}

impl FeatureSpec {
    pub const ALL: [FeatureSpec; 2] = [FeatureSpec::Benchmark, FeatureSpec::Extended];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSpec::Benchmark => "benchmark",
            FeatureSpec::Extended => "extended",
        }
    }

    pub fn columns(self) -> Vec<&'static str> {
        let mut cols = BENCHMARK_COLUMNS.to_vec();
        if self == FeatureSpec::Extended {
            cols.extend(EXTENDED_EXTRA_COLUMNS);
        }
        cols
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSpec {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "benchmark" => Ok(FeatureSpec::Benchmark),
            "extended" => Ok(FeatureSpec::Extended),
            _ => Err(format!("unknown feature spec `{s}` (benchmark|extended)")),
        }
    }
}

pub const BENCHMARK_COLUMNS: [&str; 18] = [
    "expected_loss",
    "size",
    "term",
    "trigger_indemnity",
    "wind",
    "earthquake",
    "multiterritory",
    "us",
    "europe",
    "japan",
    "us_wind",
    "us_eq",
    "europe_wind",
    "japan_eq",
    "sponsor_swiss_re",
    "investment_grade",
    "rol_index",
    "bb_spread",
];

pub const EXTENDED_EXTRA_COLUMNS: [&str; 3] = ["rol_index_change", "soi_lag15", "olr_lag12"];

const CONTINUOUS: [&str; 8] = [
    "expected_loss",
    "size",
    "term",
    "rol_index",
    "bb_spread",
    "rol_index_change",
    "soi_lag15",
    "olr_lag12",
];

pub fn is_continuous(column: &str) -> bool {
    CONTINUOUS.contains(&column)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// Dummies keep their 0/1 coding; only continuous columns are rescaled.
    pub rescaled: bool,
}

/// Per-column statistics, fitted on a training partition and replayed on
/// every other row. Columns absent here were dropped for zero variance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<ColumnScaling>,
}

impl Standardization {
    pub fn scaling(&self, name: &str) -> Option<&ColumnScaling> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Which rows the standardization statistics come from.
#[derive(Clone, Copy, Debug)]
pub enum Standardize<'a> {
    InPlace,
    OnRows(&'a [usize]),
    Given(&'a Standardization),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub row_dates: Vec<NaiveDate>,
    pub standardization: Standardization,
    /// Human-readable notes such as dropped zero-variance columns.
    pub warnings: Vec<String>,
    /// Rows whose `rol_index_change` fell back to the earliest available difference.
    pub flagged_rows: Vec<usize>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|j| self.x.column(j).iter().copied().collect())
    }

    /// Keeps only `names`, in this matrix's column order.
    pub fn select_columns(&self, names: &[String]) -> FeatureMatrix {
        let keep: Vec<usize> = (0..self.n_cols()).filter(|&j| names.contains(&self.columns[j])).collect();
        FeatureMatrix {
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            x: self.x.select_columns(&keep),
            y: self.y.clone(),
            row_dates: self.row_dates.clone(),
            standardization: Standardization {
                columns: self
                    .standardization
                    .columns
                    .iter()
                    .filter(|c| names.contains(&c.name))
                    .cloned()
                    .collect(),
            },
            warnings: self.warnings.clone(),
            flagged_rows: self.flagged_rows.clone(),
        }
    }

    pub fn rows(&self, rows: &[usize]) -> (DMatrix<f64>, Vec<f64>) {
        (self.x.select_rows(rows), rows.iter().map(|&i| self.y[i]).collect())
    }

    /// CSV with header `date,<columns...>,final_spread`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,");
        out.push_str(&self.columns.join(","));
        out.push_str(",final_spread\n");
        for i in 0..self.n_rows() {
            out.push_str(&self.row_dates[i].format("%Y-%m-%d").to_string());
            for j in 0..self.n_cols() {
                out.push(',');
                out.push_str(&self.x[(i, j)].to_string());
            }
            out.push_str(&format!(",{}\n", self.y[i]));
        }
        out
    }
}

fn dummy(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Wind / earthquake exposure: the single-peril type, or for multiperil
/// tranches the matching region x peril flags.
fn wind_exposure(t: &TrancheRecord) -> bool {
    match t.peril_type {
        PerilType::Storm => true,
        PerilType::Multiperil => t.region_perils.us_wind || t.region_perils.europe_wind,
        _ => false,
    }
}

fn quake_exposure(t: &TrancheRecord) -> bool {
    match t.peril_type {
        PerilType::Earthquake => true,
        PerilType::Multiperil => t.region_perils.us_eq || t.region_perils.japan_eq,
        _ => false,
    }
}

/// `rol_index(t) - rol_index(t - 12 months)` on the monthly index implied
/// by the tranches (monthly mean, carried forward over months without
/// issuance). Rows whose `t - 12` precedes the data reuse the earliest
/// available difference and are returned as flagged.
pub fn rol_index_change(tranches: &[TrancheRecord]) -> (Vec<f64>, Vec<usize>) {
    let mut monthly: BTreeMap<YearMonth, (f64, usize)> = BTreeMap::new();
    for t in tranches {
        let e = monthly.entry(YearMonth::of(t.issue_date)).or_insert((0.0, 0));
        e.0 += t.rol_index;
        e.1 += 1;
    }
    let first = *monthly.keys().next().unwrap();
    let level_at = |ym: YearMonth| -> Option<f64> {
        monthly.range(..=ym).next_back().map(|(_, (s, c))| s / *c as f64)
    };
    let diff_at = |ym: YearMonth| -> Option<f64> {
        let back = ym.minus_months(12);
        if back < first {
            None
        } else {
            Some(level_at(ym).unwrap() - level_at(back).unwrap())
        }
    };
    let earliest = monthly.keys().find_map(|&ym| diff_at(ym)).unwrap_or(0.0);
    let mut flagged = Vec::new();
    let values = tranches
        .iter()
        .enumerate()
        .map(|(i, t)| {
            diff_at(YearMonth::of(t.issue_date)).unwrap_or_else(|| {
                flagged.push(i);
                earliest
            })
        })
        .collect();
    (values, flagged)
}

/// Named unscaled columns plus the rows flagged while building them.
type RawColumns = (Vec<(&'static str, Vec<f64>)>, Vec<usize>);

fn raw_columns(dataset: &Dataset, spec: FeatureSpec) -> Result<RawColumns> {
    let ts = dataset.tranches();
    let col = |f: &dyn Fn(&TrancheRecord) -> f64| ts.iter().map(f).collect::<Vec<f64>>();
    let mut cols: Vec<(&'static str, Vec<f64>)> = vec![
        ("expected_loss", col(&|t| t.expected_loss)),
        ("size", col(&|t| t.size)),
        ("term", col(&|t| t.term)),
        ("trigger_indemnity", col(&|t| dummy(t.trigger_indemnity))),
        ("wind", col(&|t| dummy(wind_exposure(t)))),
        ("earthquake", col(&|t| dummy(quake_exposure(t)))),
        ("multiterritory", col(&|t| dummy(t.territory == Territory::Multi))),
        ("us", col(&|t| dummy(t.territory == Territory::Us))),
        ("europe", col(&|t| dummy(t.territory == Territory::Europe))),
        ("japan", col(&|t| dummy(t.territory == Territory::Japan))),
        ("us_wind", col(&|t| dummy(t.region_perils.us_wind))),
        ("us_eq", col(&|t| dummy(t.region_perils.us_eq))),
        ("europe_wind", col(&|t| dummy(t.region_perils.europe_wind))),
        ("japan_eq", col(&|t| dummy(t.region_perils.japan_eq))),
        ("sponsor_swiss_re", col(&|t| dummy(t.sponsor_swiss_re))),
        ("investment_grade", col(&|t| dummy(t.investment_grade))),
        ("rol_index", col(&|t| t.rol_index)),
        ("bb_spread", col(&|t| t.bb_spread)),
    ];
    let mut flagged = Vec::new();
    if spec == FeatureSpec::Extended {
        let (change, f) = rol_index_change(ts);
        flagged = f;
        cols.push(("rol_index_change", change));
        cols.push(("soi_lag15", lag_join(ts, dataset.series("SOI")?, 15)?));
        cols.push(("olr_lag12", lag_join(ts, dataset.series("OLR")?, 12)?));
    }
    Ok((cols, flagged))
}

/// Builds the design matrix for `spec`. Continuous columns are centred and
/// scaled by the sample standard deviation of the statistics rows; any
/// column with zero variance there is dropped and noted in `warnings`.
pub fn build_features(dataset: &Dataset, spec: FeatureSpec, standardize: Standardize<'_>) -> Result<FeatureMatrix> {
    let (raw, flagged_rows) = raw_columns(dataset, spec)?;
    let n = dataset.len();
    let mut warnings = Vec::new();

    let standardization = match standardize {
        Standardize::Given(s) => s.clone(),
        Standardize::InPlace | Standardize::OnRows(_) => {
            let rows: Vec<usize> = match standardize {
                Standardize::OnRows(r) => r.to_vec(),
                _ => (0..n).collect(),
            };
            if rows.len() < 2 {
                return Err(Error::invalid("standardization needs at least 2 rows"));
            }
            let mut columns = Vec::new();
            for (name, values) in &raw {
                let sub: Vec<f64> = rows.iter().map(|&i| values[i]).collect();
                let mean = stats::mean(&sub);
                let std = stats::sample_std(&sub);
                if !(std > 0.0) || std < 1e-12 * mean.abs().max(1.0) {
                    let msg = format!("column `{name}` has zero variance and was dropped");
                    log::warn!("{msg}");
                    warnings.push(msg);
                    continue;
                }
                columns.push(ColumnScaling {
                    name: name.to_string(),
                    mean,
                    std,
                    rescaled: is_continuous(name),
                });
            }
            Standardization { columns }
        }
    };

    let mut x = DMatrix::zeros(n, standardization.columns.len());
    for (j, sc) in standardization.columns.iter().enumerate() {
        let values = &raw
            .iter()
            .find(|(name, _)| *name == sc.name)
            .ok_or_else(|| Error::invalid(format!("standardization names unknown column `{}`", sc.name)))?
            .1;
        for i in 0..n {
            x[(i, j)] = if sc.rescaled { (values[i] - sc.mean) / sc.std } else { values[i] };
        }
    }

    Ok(FeatureMatrix {
        columns: standardization.columns.iter().map(|c| c.name.clone()).collect(),
        x,
        y: dataset.tranches().iter().map(|t| t.final_spread).collect(),
        row_dates: dataset.tranches().iter().map(|t| t.issue_date).collect(),
        standardization,
        warnings,
        flagged_rows,
    })
}
