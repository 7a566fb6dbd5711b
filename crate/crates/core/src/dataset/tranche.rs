//! Tranche records and their comma-separated file format.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerilType {
    Multiperil,
    Storm,
    Earthquake,
    Other,
}

impl PerilType {
    pub const ALL: [PerilType; 4] = [
        PerilType::Multiperil,
        PerilType::Storm,
        PerilType::Earthquake,
        PerilType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerilType::Multiperil => "multiperil",
            PerilType::Storm => "storm",
            PerilType::Earthquake => "earthquake",
            PerilType::Other => "other",
        }
    }
}

impl FromStr for PerilType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        PerilType::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown peril type `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Territory {
    Multi,
    Us,
    Europe,
    Japan,
    Other,
}

impl Territory {
    pub const ALL: [Territory; 5] = [
        Territory::Multi,
        Territory::Us,
        Territory::Europe,
        Territory::Japan,
        Territory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Territory::Multi => "multi",
            Territory::Us => "us",
            Territory::Europe => "europe",
            Territory::Japan => "japan",
            Territory::Other => "other",
        }
    }
}

impl FromStr for Territory {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Territory::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown territory `{s}`"))
    }
}

/// Region x peril coverage flags. Several may be set at once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionPerils {
    pub us_wind: bool,
    pub us_eq: bool,
    pub europe_wind: bool,
    pub japan_eq: bool,
}

/// One primary-market tranche. Fractions are decimals, money is USD millions,
/// durations are months.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrancheRecord {
    pub issue_date: NaiveDate,
    pub attachment_point: f64,
    pub attachment_probability: f64,
    pub bb_spread: f64,
    pub cedent_tenure: f64,
    pub coverage_limit: f64,
    pub expected_loss: f64,
    pub final_spread: f64,
    pub n_locations: u32,
    pub n_perils: u32,
    pub rol_index: f64,
    pub size: f64,
    pub term: f64,
    pub peril_type: PerilType,
    pub trigger_indemnity: bool,
    pub region_perils: RegionPerils,
    pub territory: Territory,
    pub sponsor_swiss_re: bool,
    pub investment_grade: bool,
}

/// Column names of the tranche file, in the order they are written.
pub const TRANCHE_COLUMNS: [&str; 22] = [
    "issue_date",
    "attachment_point",
    "attachment_probability",
    "bb_spread",
    "cedent_tenure",
    "coverage_limit",
    "expected_loss",
    "final_spread",
    "n_locations",
    "n_perils",
    "rol_index",
    "size",
    "term",
    "peril_type",
    "trigger_indemnity",
    "us_wind",
    "us_eq",
    "europe_wind",
    "japan_eq",
    "territory",
    "sponsor_swiss_re",
    "investment_grade",
];

/// Observed min/max of the continuous fields over the reference sample.
/// The term bound of 120.5 months admits the longest observed tenor.
pub const STRICT_BOUNDS: [(&str, f64, f64); 12] = [
    ("attachment_point", 17.5, 20670.0),
    ("attachment_probability", 0.00021, 0.23),
    ("bb_spread", 0.015, 0.11),
    ("cedent_tenure", 0.0, 281.0),
    ("coverage_limit", 65.0, 25000.0),
    ("expected_loss", 0.0, 0.15),
    ("final_spread", 0.0065, 0.49),
    ("n_locations", 1.0, 3.0),
    ("n_perils", 1.0, 8.0),
    ("rol_index", 151.8, 293.8),
    ("size", 1.8, 1500.0),
    ("term", 1.0, 120.5),
];

impl TrancheRecord {
    /// Continuous field by column name, for range checks.
    pub fn continuous(&self, name: &str) -> Option<f64> {
        Some(match name {
            "attachment_point" => self.attachment_point,
            "attachment_probability" => self.attachment_probability,
            "bb_spread" => self.bb_spread,
            "cedent_tenure" => self.cedent_tenure,
            "coverage_limit" => self.coverage_limit,
            "expected_loss" => self.expected_loss,
            "final_spread" => self.final_spread,
            "n_locations" => self.n_locations as f64,
            "n_perils" => self.n_perils as f64,
            "rol_index" => self.rol_index,
            "size" => self.size,
            "term" => self.term,
            _ => return None,
        })
    }

    /// Basic domain invariants; `strict` adds the reference min/max bounds.
    /// `row` is only used for error reporting.
    pub fn validate(&self, row: usize, strict: bool) -> Result<()> {
        let range = |field: &str, value: f64, min: f64, max: f64| -> Result<()> {
            if !value.is_finite() || value < min || value > max {
                return Err(Error::OutOfRange {
                    row,
                    field: field.to_string(),
                    value,
                    min,
                    max,
                });
            }
            Ok(())
        };
        for field in [
            "attachment_probability",
            "bb_spread",
            "expected_loss",
        ] {
            range(field, self.continuous(field).unwrap(), 0.0, 1.0)?;
        }
        if !(self.final_spread > 0.0 && self.final_spread < 1.0) {
            return Err(Error::OutOfRange {
                row,
                field: "final_spread".into(),
                value: self.final_spread,
                min: 0.0,
                max: 1.0,
            });
        }
        range("attachment_point", self.attachment_point, 0.0, f64::MAX)?;
        range("cedent_tenure", self.cedent_tenure, 0.0, f64::MAX)?;
        range("term", self.term, 1.0, f64::MAX)?;
        range("n_locations", self.n_locations as f64, 1.0, f64::MAX)?;
        range("n_perils", self.n_perils as f64, 1.0, f64::MAX)?;
        for (field, value) in [
            ("coverage_limit", self.coverage_limit),
            ("rol_index", self.rol_index),
            ("size", self.size),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::OutOfRange {
                    row,
                    field: field.into(),
                    value,
                    min: f64::MIN_POSITIVE,
                    max: f64::MAX,
                });
            }
        }
        if strict {
            for (field, min, max) in STRICT_BOUNDS {
                range(field, self.continuous(field).unwrap(), min, max)?;
            }
        }
        Ok(())
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(format!("expected 0/1, got `{s}`")),
    }
}

struct RowReader<'a> {
    row: usize,
    record: &'a csv::StringRecord,
    index: &'a HashMap<&'static str, usize>,
}

impl RowReader<'_> {
    fn raw(&self, field: &'static str) -> &str {
        self.record.get(self.index[field]).unwrap_or("").trim()
    }

    fn parse<T>(&self, field: &'static str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<T> {
        f(self.raw(field)).map_err(|message| Error::MalformedRow {
            row: self.row,
            field: field.to_string(),
            message,
        })
    }

    fn real(&self, field: &'static str) -> Result<f64> {
        self.parse(field, |s| {
            s.parse::<f64>()
                .map_err(|_| format!("not a number: `{s}`"))
                .and_then(|v| if v.is_finite() { Ok(v) } else { Err(format!("non-finite: `{s}`")) })
        })
    }

    fn count(&self, field: &'static str) -> Result<u32> {
        self.parse(field, |s| s.parse::<u32>().map_err(|_| format!("not a count: `{s}`")))
    }

    fn flag(&self, field: &'static str) -> Result<bool> {
        self.parse(field, parse_bool)
    }
}

/// Parses a tranche file. Records come back sorted by issue date (stable
/// for equal dates). `strict` enforces the reference min/max bounds.
pub fn parse_tranches(text: &str, strict: bool) -> Result<Vec<TrancheRecord>> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut index = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        let known = TRANCHE_COLUMNS
            .iter()
            .find(|c| c.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownHeader(name.to_string()))?;
        index.insert(*known, i);
    }
    if let Some(missing) = TRANCHE_COLUMNS.iter().find(|c| !index.contains_key(*c)) {
        return Err(Error::MissingHeader(missing.to_string()));
    }

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let r = RowReader { row, record: &record, index: &index };
        let tranche = TrancheRecord {
            issue_date: r.parse("issue_date", |s| {
                NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
            })?,
            attachment_point: r.real("attachment_point")?,
            attachment_probability: r.real("attachment_probability")?,
            bb_spread: r.real("bb_spread")?,
            cedent_tenure: r.real("cedent_tenure")?,
            coverage_limit: r.real("coverage_limit")?,
            expected_loss: r.real("expected_loss")?,
            final_spread: r.real("final_spread")?,
            n_locations: r.count("n_locations")?,
            n_perils: r.count("n_perils")?,
            rol_index: r.real("rol_index")?,
            size: r.real("size")?,
            term: r.real("term")?,
            peril_type: r.parse("peril_type", str::parse)?,
            trigger_indemnity: r.flag("trigger_indemnity")?,
            region_perils: RegionPerils {
                us_wind: r.flag("us_wind")?,
                us_eq: r.flag("us_eq")?,
                europe_wind: r.flag("europe_wind")?,
                japan_eq: r.flag("japan_eq")?,
            },
            territory: r.parse("territory", str::parse)?,
            sponsor_swiss_re: r.flag("sponsor_swiss_re")?,
            investment_grade: r.flag("investment_grade")?,
        };
        tranche.validate(row, strict)?;
        out.push(tranche);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    out.sort_by_key(|t| t.issue_date);
    Ok(out)
}

struct Flag(bool);

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0 { "1" } else { "0" })
    }
}

/// Writes tranches in the same layout `parse_tranches` reads. Floats use the
/// shortest representation that parses back to the identical value.
pub fn write_tranches(tranches: &[TrancheRecord]) -> String {
    let mut out = TRANCHE_COLUMNS.join(",");
    out.push('\n');
    for t in tranches {
        let rp = t.region_perils;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            t.issue_date.format("%Y-%m-%d"),
            t.attachment_point,
            t.attachment_probability,
            t.bb_spread,
            t.cedent_tenure,
            t.coverage_limit,
            t.expected_loss,
            t.final_spread,
            t.n_locations,
            t.n_perils,
            t.rol_index,
            t.size,
            t.term,
            t.peril_type.as_str(),
            Flag(t.trigger_indemnity),
            Flag(rp.us_wind),
            Flag(rp.us_eq),
            Flag(rp.europe_wind),
            Flag(rp.japan_eq),
            t.territory.as_str(),
            Flag(t.sponsor_swiss_re),
            Flag(t.investment_grade),
        ));
    }
    out
}
