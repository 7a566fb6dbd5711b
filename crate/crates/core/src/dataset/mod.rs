//! Tranche and climate data model, file formats and the synthetic generator.

mod climate;
mod month;
mod synthetic;
mod tranche;

use std::collections::BTreeMap;
use std::path::Path;

pub use climate::{parse_climate_series, ClimateParseOptions, ClimateSeries, MAX_INTERPOLATED_GAP, MISSING_SENTINEL};
pub use month::YearMonth;
pub use synthetic::{generate_synthetic, PlantedCoefficients, SyntheticDataset, CLIMATE_SERIES_NAMES};
pub use tranche::{
    parse_tranches, write_tranches, PerilType, RegionPerils, Territory, TrancheRecord, STRICT_BOUNDS,
    TRANCHE_COLUMNS,
};

use crate::error::{Error, Result};

/// Longest climate lag the feature builders may request.
pub const MAX_LAG_MONTHS: u32 = 18;

/// Tranches sorted by issue date plus the climate series they join against.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    tranches: Vec<TrancheRecord>,
    climate: BTreeMap<String, ClimateSeries>,
}

impl Dataset {
    /// Sorts tranches by date and checks that every climate series covers
    /// `[first issue - 18 months, last issue]`.
    pub fn new(mut tranches: Vec<TrancheRecord>, climate: impl IntoIterator<Item = ClimateSeries>) -> Result<Self> {
        if tranches.is_empty() {
            return Err(Error::EmptyInput);
        }
        tranches.sort_by_key(|t| t.issue_date);
        let climate = climate.into_iter().map(|s| (s.name().to_string(), s)).collect();
        let ds = Self { tranches, climate };
        ds.check_coverage()?;
        Ok(ds)
    }

    fn check_coverage(&self) -> Result<()> {
        let first = YearMonth::of(self.tranches[0].issue_date).minus_months(MAX_LAG_MONTHS);
        let last = YearMonth::of(self.tranches[self.tranches.len() - 1].issue_date);
        for s in self.climate.values() {
            for needed in [first, last] {
                if s.get(needed).is_none() {
                    return Err(Error::Unresolvable {
                        series: s.name().to_string(),
                        year: needed.year,
                        month: needed.month,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn tranches(&self) -> &[TrancheRecord] {
        &self.tranches
    }

    pub fn climate(&self) -> &BTreeMap<String, ClimateSeries> {
        &self.climate
    }

    pub fn series(&self, name: &str) -> Result<&ClimateSeries> {
        self.climate
            .get(name)
            .ok_or_else(|| Error::MissingSeries(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.tranches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tranches.is_empty()
    }

    /// Loads `tranches.csv`-style text plus every `*.csv` in `climate_dir`
    /// (series named after the file stem).
    pub fn load(tranche_path: &Path, climate_dir: Option<&Path>, strict: bool, opts: ClimateParseOptions) -> Result<Self> {
        let tranches = parse_tranches(&std::fs::read_to_string(tranche_path)?, strict)?;
        let mut series = Vec::new();
        if let Some(dir) = climate_dir {
            let mut paths: Vec<_> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            paths.sort();
            for path in paths {
                let name = path.file_stem().unwrap().to_string_lossy().to_string();
                series.push(parse_climate_series(&std::fs::read_to_string(&path)?, &name, opts)?);
            }
        }
        Self::new(tranches, series)
    }

    /// Writes `tranches.csv` and `climate/<NAME>.csv` (long layout) under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("climate"))?;
        std::fs::write(dir.join("tranches.csv"), write_tranches(&self.tranches))?;
        for (name, s) in &self.climate {
            std::fs::write(dir.join("climate").join(format!("{name}.csv")), s.to_long_csv())?;
        }
        Ok(())
    }
}
