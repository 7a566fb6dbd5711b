use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Calendar month used for every climate join; days are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month {month} out of range");
        Self { year, month }
    }

    pub fn of(date: NaiveDate) -> Self {
        Self::new(date.year(), date.month())
    }

    /// Months since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: ord.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn minus_months(self, months: u32) -> Self {
        Self::from_ordinal(self.ordinal() - months as i64)
    }

    pub fn plus_months(self, months: u32) -> Self {
        Self::from_ordinal(self.ordinal() + months as i64)
    }

    pub fn months_until(self, later: YearMonth) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{:02}", self.year, self.month)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifting_crosses_year_boundary() {
        let jan = YearMonth::new(2001, 1);
        assert_eq!(jan.minus_months(1), YearMonth::new(2000, 12));
        assert_eq!(jan.minus_months(12), YearMonth::new(2000, 1));
        assert_eq!(jan.minus_months(15), YearMonth::new(1999, 10));
        assert_eq!(YearMonth::new(1999, 10).plus_months(15), jan);
    }

    #[test]
    fn ordinal_round_trips() {
        for ord in -30..30 {
            assert_eq!(YearMonth::from_ordinal(ord).ordinal(), ord);
        }
    }
}
