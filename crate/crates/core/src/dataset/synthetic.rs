//! Seeded synthetic market with known coupon-generating coefficients.
//!
//! Continuous fields come from truncated log-normal/normal laws whose
//! parameters were solved so the *truncated* mean and standard deviation hit
//! the reference sample moments. Categorical fields use the reference shares.
//! Climate series are unit-variance AR(1) processes (autocorrelation 0.8).
//! The coupon is a linear function of a handful of fields plus SOI lagged
//! 15 months and OLR lagged 12 months plus Gaussian noise.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Duration, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};

use super::climate::ClimateSeries;
use super::month::YearMonth;
use super::tranche::{PerilType, RegionPerils, Territory, TrancheRecord};
use super::Dataset;
use crate::error::{Error, Result};
use crate::stats;

pub const CLIMATE_SERIES_NAMES: [&str; 14] = [
    "ONI",
    "AO",
    "NAO",
    "OLR",
    "PNA",
    "PDO",
    "SOI",
    "SST_WORLD",
    "SST_ATLANTIC_HURRICANE",
    "SST_NORTH_ATLANTIC",
    "SST_SUBPOLAR_NORTH_ATLANTIC",
    "SST_GULF_OF_MEXICO",
    "SST_GULF_OF_MAINE",
    "SST_NINO34",
];

const CLIMATE_AR: f64 = 0.8;
const ROL_AR: f64 = 0.97;
// Slightly inflated so the clipped path keeps the reference spread.
const ROL_SCALE: f64 = 1.2;

/// Log-space (mu, sigma) and truncation bounds.
struct TruncLogNormal {
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
}

const ATTACHMENT_POINT: TruncLogNormal = TruncLogNormal { mu: 7.034_412, sigma: 1.629_529, lo: 17.5, hi: 20670.0 };
const ATTACHMENT_PROB: TruncLogNormal = TruncLogNormal { mu: -3.642_849, sigma: 1.034_733, lo: 0.00021, hi: 0.23 };
const BB_SPREAD: TruncLogNormal = TruncLogNormal { mu: -3.455_040, sigma: 0.409_060, lo: 0.015, hi: 0.11 };
const CEDENT_TENURE: TruncLogNormal = TruncLogNormal { mu: 4.595_261, sigma: 2.653_830, lo: 0.0, hi: 281.0 };
const COVERAGE_LIMIT: TruncLogNormal = TruncLogNormal { mu: 7.378_410, sigma: 1.497_705, lo: 65.0, hi: 25000.0 };
const EXPECTED_LOSS: TruncLogNormal = TruncLogNormal { mu: -4.087_437, sigma: 1.023_931, lo: 0.0, hi: 0.15 };
const SIZE: TruncLogNormal = TruncLogNormal { mu: 4.583_784, sigma: 0.800_454, lo: 1.8, hi: 1500.0 };

const PERIL_SHARES: [f64; 4] = [0.5559, 0.2411, 0.173, 0.03];
const TERRITORY_SHARES: [f64; 5] = [0.2561, 0.5722, 0.0736, 0.0613, 0.0422];
const INDEMNITY_SHARE: f64 = 0.4305;
const REGION_PERIL_SHARES: [f64; 4] = [0.6253, 0.5545, 0.188, 0.1213];
const SWISS_RE_SHARE: f64 = 0.08;
const INVESTMENT_GRADE_SHARE: f64 = 0.05;
const N_LOCATIONS_SHARES: [f64; 3] = [0.759, 0.142, 0.099];
// Multiperil tranches cover 2 + k perils with P(k) proportional to 0.68^k.
const EXTRA_PERIL_DECAY: f64 = 0.68;

/// Coefficients of the coupon-generating model, in sidecar order.
pub const PLANTED: [(&str, f64); 9] = [
    ("intercept", 0.035),
    ("expected_loss", 1.2),
    ("bb_spread", 0.4),
    ("peril_storm", 0.006),
    ("peril_earthquake", -0.004),
    ("territory_us", -0.004),
    ("soi_lag15", 0.010),
    ("olr_lag12", 0.008),
    ("noise_sd", 0.008),
];

/// Known generating coefficients, written as `name=value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedCoefficients(pub BTreeMap<String, f64>);

impl PlantedCoefficients {
    fn reference() -> Self {
        Self(PLANTED.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }

    pub fn to_sidecar(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }

    pub fn parse_sidecar(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedRow {
                row: i + 1,
                field: "line".into(),
                message: format!("expected name=value, got `{line}`"),
            })?;
            let v: f64 = v.trim().parse().map_err(|_| Error::MalformedRow {
                row: i + 1,
                field: k.trim().to_string(),
                message: format!("not a number: `{}`", v.trim()),
            })?;
            map.insert(k.trim().to_string(), v);
        }
        Ok(Self(map))
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub planted: PlantedCoefficients,
}

fn draw_trunc_lognormal(rng: &mut ChaCha8Rng, d: &TruncLogNormal) -> f64 {
    let law = LogNormal::new(d.mu, d.sigma).unwrap();
    for _ in 0..10_000 {
        let x = law.sample(rng);
        if x >= d.lo && x <= d.hi {
            return x;
        }
    }
    law.sample(rng).clamp(d.lo, d.hi)
}

fn draw_trunc_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let law = Normal::new(mean, sd).unwrap();
    loop {
        let x = law.sample(rng);
        if x >= lo && x <= hi {
            return x;
        }
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

fn ar1_path(rng: &mut ChaCha8Rng, len: usize, phi: f64) -> Vec<f64> {
    let innov = Normal::new(0.0, (1.0 - phi * phi).sqrt()).unwrap();
    let mut x: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
    (0..len)
        .map(|_| {
            let cur = x;
            x = phi * x + innov.sample(rng);
            cur
        })
        .collect()
}

/// Generates `n` tranches issued June 1997 to December 2020 plus climate
/// series covering 1995-01..2020-12. Deterministic in `seed`.
pub fn generate_synthetic(seed: u64, n: usize) -> Result<SyntheticDataset> {
    if n < 50 {
        return Err(Error::invalid(format!("synthetic dataset needs n >= 50, got {n}")));
    }
    let mut rng = stats::rng(seed);
    let window_start = YearMonth::new(1995, 1);
    let window_len = window_start.months_until(YearMonth::new(2020, 12)) as usize + 1;

    let mut climate = BTreeMap::new();
    for name in CLIMATE_SERIES_NAMES {
        let values = ar1_path(&mut rng, window_len, CLIMATE_AR)
            .into_iter()
            .map(|v| round_to(v, 4))
            .collect();
        climate.insert(name.to_string(), ClimateSeries::new(name, window_start, values)?);
    }

    // Market-wide reinsurance pricing index, standardized over the window.
    let rol_path = {
        let raw = ar1_path(&mut rng, window_len, ROL_AR);
        let m = stats::mean(&raw);
        let s = stats::sample_std(&raw);
        raw.into_iter()
            .map(|v| round_to((220.49 + 40.23 * ROL_SCALE * (v - m) / s).clamp(151.8, 293.8), 2))
            .collect::<Vec<_>>()
    };

    let first_day = NaiveDate::from_ymd_opt(1997, 6, 1).unwrap();
    let last_day = NaiveDate::from_ymd_opt(2020, 12, 31).unwrap();
    let span = (last_day - first_day).num_days();
    let mut dates: Vec<NaiveDate> = (0..n)
        .map(|_| first_day + Duration::days(rng.random_range(0..=span)))
        .collect();
    dates.sort();

    let planted = PlantedCoefficients::reference();
    let peril_law = WeightedIndex::new(PERIL_SHARES).unwrap();
    let territory_law = WeightedIndex::new(TERRITORY_SHARES).unwrap();
    let locations_law = WeightedIndex::new(N_LOCATIONS_SHARES).unwrap();
    let extra_perils_law = WeightedIndex::new((0..7).map(|k| EXTRA_PERIL_DECAY.powi(k))).unwrap();
    let noise = Normal::new(0.0, planted.get("noise_sd")).unwrap();
    let soi = &climate["SOI"];
    let olr = &climate["OLR"];

    let mut tranches = Vec::with_capacity(n);
    for issue_date in dates {
        let ym = YearMonth::of(issue_date);
        let peril_type = PerilType::ALL[peril_law.sample(&mut rng)];
        let territory = Territory::ALL[territory_law.sample(&mut rng)];
        let n_perils = if peril_type == PerilType::Multiperil {
            2 + extra_perils_law.sample(&mut rng) as u32
        } else {
            1
        };
        let region_perils = RegionPerils {
            us_wind: rng.random_bool(REGION_PERIL_SHARES[0]),
            us_eq: rng.random_bool(REGION_PERIL_SHARES[1]),
            europe_wind: rng.random_bool(REGION_PERIL_SHARES[2]),
            japan_eq: rng.random_bool(REGION_PERIL_SHARES[3]),
        };
        let expected_loss = round_to(draw_trunc_lognormal(&mut rng, &EXPECTED_LOSS), 5);
        let bb_spread = round_to(draw_trunc_lognormal(&mut rng, &BB_SPREAD), 5).clamp(BB_SPREAD.lo, BB_SPREAD.hi);
        let mut t = TrancheRecord {
            issue_date,
            attachment_point: round_to(draw_trunc_lognormal(&mut rng, &ATTACHMENT_POINT), 2),
            attachment_probability: round_to(draw_trunc_lognormal(&mut rng, &ATTACHMENT_PROB), 5)
                .clamp(ATTACHMENT_PROB.lo, ATTACHMENT_PROB.hi),
            bb_spread,
            cedent_tenure: draw_trunc_lognormal(&mut rng, &CEDENT_TENURE).round(),
            coverage_limit: round_to(draw_trunc_lognormal(&mut rng, &COVERAGE_LIMIT), 2),
            expected_loss,
            final_spread: 0.0,
            n_locations: 1 + locations_law.sample(&mut rng) as u32,
            n_perils,
            rol_index: rol_path[window_start.months_until(ym) as usize],
            size: round_to(draw_trunc_lognormal(&mut rng, &SIZE), 2),
            term: draw_trunc_normal(&mut rng, 36.38, 12.5, 1.0, 120.0).round(),
            peril_type,
            trigger_indemnity: rng.random_bool(INDEMNITY_SHARE),
            region_perils,
            territory,
            sponsor_swiss_re: rng.random_bool(SWISS_RE_SHARE),
            investment_grade: rng.random_bool(INVESTMENT_GRADE_SHARE),
        };
        let spread = planted.get("intercept")
            + planted.get("expected_loss") * t.expected_loss
            + planted.get("bb_spread") * t.bb_spread
            + planted.get("peril_storm") * f64::from(u8::from(peril_type == PerilType::Storm))
            + planted.get("peril_earthquake") * f64::from(u8::from(peril_type == PerilType::Earthquake))
            + planted.get("territory_us") * f64::from(u8::from(territory == Territory::Us))
            + planted.get("soi_lag15") * soi.get(ym.minus_months(15)).unwrap()
            + planted.get("olr_lag12") * olr.get(ym.minus_months(12)).unwrap()
            + noise.sample(&mut rng);
        t.final_spread = round_to(spread, 6).clamp(0.0065, 0.49);
        tranches.push(t);
    }

    Ok(SyntheticDataset {
        dataset: Dataset::new(tranches, climate.into_values())?,
        planted,
    })
}
