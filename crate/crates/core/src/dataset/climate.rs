//! Monthly climate series (teleconnection indices and SST regions).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::month::YearMonth;
use crate::error::{Error, Result};

/// Missing-value sentinel used by common climate-index files.
pub const MISSING_SENTINEL: f64 = -999.9;

/// Longest interior run of missing months that interpolation may fill.
pub const MAX_INTERPOLATED_GAP: usize = 2;

const MONTH_NAMES: [&str; 12] = [
    "JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC",
];

/// A contiguous monthly series. Storage is a dense vector starting at
/// `start`, so gaps and duplicates cannot be represented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClimateSeries {
    name: String,
    start: YearMonth,
    values: Vec<f64>,
}

impl ClimateSeries {
    pub fn new(name: impl Into<String>, start: YearMonth, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::invalid(format!("series `{name}` is empty")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let ym = start.plus_months(i as u32);
            return Err(Error::ClimateGap {
                series: name,
                year: ym.year,
                month: ym.month,
                months: 1,
            });
        }
        Ok(Self { name, start, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn first(&self) -> YearMonth {
        self.start
    }

    pub fn last(&self) -> YearMonth {
        self.start.plus_months(self.values.len() as u32 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ym: YearMonth) -> Option<f64> {
        let offset = self.start.months_until(ym);
        if offset < 0 {
            return None;
        }
        self.values.get(offset as usize).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (YearMonth, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.start.plus_months(i as u32), *v))
    }

    /// Long layout: `YEAR,MONTH,VALUE`.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("YEAR,MONTH,VALUE\n");
        for (ym, v) in self.iter() {
            out.push_str(&format!("{},{},{}\n", ym.year, ym.month, v));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ClimateParseOptions {
    /// Linearly fill interior gaps of at most two months.
    pub interpolate: bool,
}

fn parse_cell(cell: &str, row: usize, field: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| Error::MalformedRow {
        row,
        field: field.to_string(),
        message: format!("non-numeric cell `{cell}`"),
    })?;
    if (v - MISSING_SENTINEL).abs() < 1e-9 {
        Ok(None)
    } else if !v.is_finite() {
        Err(Error::MalformedRow {
            row,
            field: field.to_string(),
            message: format!("non-finite cell `{cell}`"),
        })
    } else {
        Ok(Some(v))
    }
}

fn parse_int<T: std::str::FromStr>(cell: &str, row: usize, field: &str) -> Result<T> {
    cell.trim().parse().map_err(|_| Error::MalformedRow {
        row,
        field: field.to_string(),
        message: format!("expected integer, got `{}`", cell.trim()),
    })
}

/// Parses a monthly series in wide (`YEAR,JAN..DEC`) or long
/// (`YEAR,MONTH,VALUE`) layout, detected from the header. Missing cells
/// (empty or the sentinel) at either end are trimmed; interior gaps are
/// an error unless `interpolate` is set and the gap is at most two months.
pub fn parse_climate_series(text: &str, name: &str, opts: ClimateParseOptions) -> Result<ClimateSeries> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_ascii_uppercase()).collect();

    let wide = headers.len() == 13
        && headers[0] == "YEAR"
        && headers[1..].iter().zip(MONTH_NAMES).all(|(h, m)| h.starts_with(m));
    let long = headers == ["YEAR", "MONTH", "VALUE"];
    if !wide && !long {
        return Err(Error::UnknownHeader(headers.join(",")));
    }

    let mut cells: BTreeMap<YearMonth, Option<f64>> = BTreeMap::new();
    let mut insert = |ym: YearMonth, v: Option<f64>| -> Result<()> {
        if cells.insert(ym, v).is_some() {
            return Err(Error::DuplicateMonth {
                series: name.to_string(),
                year: ym.year,
                month: ym.month,
            });
        }
        Ok(())
    };
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let year: i32 = parse_int(&record[0], row, "YEAR")?;
        if wide {
            for m in 0..12 {
                let v = parse_cell(&record[m + 1], row, MONTH_NAMES[m])?;
                insert(YearMonth::new(year, m as u32 + 1), v)?;
            }
        } else {
            let month: u32 = parse_int(&record[1], row, "MONTH")?;
            if !(1..=12).contains(&month) {
                return Err(Error::MalformedRow {
                    row,
                    field: "MONTH".into(),
                    message: format!("month {month} out of range"),
                });
            }
            insert(YearMonth::new(year, month), parse_cell(&record[2], row, "VALUE")?)?;
        }
    }

    let present: Vec<(YearMonth, f64)> = cells
        .iter()
        .filter_map(|(ym, v)| v.map(|v| (*ym, v)))
        .collect();
    let (Some(&(start, _)), Some(&(end, _))) = (present.first(), present.last()) else {
        return Err(Error::EmptyInput);
    };
    let len = start.months_until(end) as usize + 1;
    let mut values: Vec<Option<f64>> = vec![None; len];
    for (ym, v) in &present {
        values[start.months_until(*ym) as usize] = Some(*v);
    }

    let mut filled = Vec::with_capacity(len);
    let mut i = 0;
    while i < len {
        match values[i] {
            Some(v) => {
                filled.push(v);
                i += 1;
            }
            None => {
                // Ends are always present after trimming, so this gap is interior.
                let gap_end = (i..len).find(|&j| values[j].is_some()).unwrap();
                let gap = gap_end - i;
                if !opts.interpolate || gap > MAX_INTERPOLATED_GAP {
                    let ym = start.plus_months(i as u32);
                    return Err(Error::ClimateGap {
                        series: name.to_string(),
                        year: ym.year,
                        month: ym.month,
                        months: gap,
                    });
                }
                let left = filled[i - 1];
                let right = values[gap_end].unwrap();
                for k in 1..=gap {
                    let w = k as f64 / (gap + 1) as f64;
                    filled.push(left + w * (right - left));
                }
                i = gap_end;
            }
        }
    }
    ClimateSeries::new(name, start, filled)
}
