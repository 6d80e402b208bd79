use std::fmt;
use std::str::FromStr;

use chrono::{Days, Months, NaiveDate};
use serde::{Deserialize, Serialize};

/// Calendar unit used by time frames, recurrence periods and completeness buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DurationUnit {
    Day,
    Week,
    Month,
    Quarter,
    Year,
}

impl DurationUnit {
    pub const ALL: [DurationUnit; 5] = [
        DurationUnit::Day,
        DurationUnit::Week,
        DurationUnit::Month,
        DurationUnit::Quarter,
        DurationUnit::Year,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DurationUnit::Day => "day",
            DurationUnit::Week => "week",
            DurationUnit::Month => "month",
            DurationUnit::Quarter => "quarter",
            DurationUnit::Year => "year",
        }
    }

    fn plural(self) -> &'static str {
        match self {
            DurationUnit::Day => "days",
            DurationUnit::Week => "weeks",
            DurationUnit::Month => "months",
            DurationUnit::Quarter => "quarters",
            DurationUnit::Year => "years",
        }
    }
}

impl fmt::Display for DurationUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DurationUnit {
    type Err = DurationParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DurationUnit::ALL
            .into_iter()
            .find(|u| u.as_str() == s || u.plural() == s)
            .ok_or_else(|| DurationParseError::UnknownUnit(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DurationParseError {
    #[error("expected \"<count> <unit>\", got {0:?}")]
    Malformed(String),
    #[error("unknown duration unit {0:?}")]
    UnknownUnit(String),
    #[error("duration count must be at least 1")]
    ZeroCount,
}

/// A positive count of calendar units, written `"<count> <unit>"` (e.g. `1 month`, `2 weeks`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Duration {
    pub count: u32,
    pub unit: DurationUnit,
}

impl Duration {
    pub fn new(count: u32, unit: DurationUnit) -> Self {
        Duration { count, unit }
    }

    pub fn days(count: u32) -> Self {
        Duration::new(count, DurationUnit::Day)
    }

    pub fn weeks(count: u32) -> Self {
        Duration::new(count, DurationUnit::Week)
    }

    pub fn months(count: u32) -> Self {
        Duration::new(count, DurationUnit::Month)
    }

    /// Adds `times` copies of this duration in one step.
    ///
    /// Month-based units clamp the day of month to the end of the target month,
    /// so `2022-01-31 + 1 month = 2022-02-28`. `None` only on calendar overflow.
    pub fn add_times(self, date: NaiveDate, times: u32) -> Option<NaiveDate> {
        let n = self.count.checked_mul(times)?;
        match self.unit {
            DurationUnit::Day => date.checked_add_days(Days::new(n as u64)),
            DurationUnit::Week => date.checked_add_days(Days::new(n as u64 * 7)),
            DurationUnit::Month => date.checked_add_months(Months::new(n)),
            DurationUnit::Quarter => date.checked_add_months(Months::new(n.checked_mul(3)?)),
            DurationUnit::Year => date.checked_add_months(Months::new(n.checked_mul(12)?)),
        }
    }

    pub fn add_to(self, date: NaiveDate) -> Option<NaiveDate> {
        self.add_times(date, 1)
    }

    /// Recovers the duration spanning `[start, end)`, preferring the coarsest unit that
    /// lands exactly on `end`.
    pub fn between(start: NaiveDate, end: NaiveDate) -> Option<Duration> {
        if end <= start {
            return None;
        }
        for unit in DurationUnit::ALL.into_iter().rev() {
            let probe = Duration::new(1, unit);
            let mut count = 1u32;
            loop {
                match probe.add_times(start, count) {
                    Some(d) if d == end => return Some(Duration::new(count, unit)),
                    Some(d) if d < end => count += 1,
                    _ => break,
                }
            }
        }
        None
    }

    /// Shortest possible length in days, used to compare durations of different units.
    pub fn min_days(self) -> u64 {
        let per = match self.unit {
            DurationUnit::Day => 1,
            DurationUnit::Week => 7,
            DurationUnit::Month => 28,
            DurationUnit::Quarter => 89,
            DurationUnit::Year => 365,
        };
        per * self.count as u64
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.count == 1 {
            write!(f, "1 {}", self.unit.as_str())
        } else {
            write!(f, "{} {}", self.count, self.unit.plural())
        }
    }
}

impl FromStr for Duration {
    type Err = DurationParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let (Some(count), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(DurationParseError::Malformed(s.to_string()));
        };
        let count: u32 = count
            .parse()
            .map_err(|_| DurationParseError::Malformed(s.to_string()))?;
        if count == 0 {
            return Err(DurationParseError::ZeroCount);
        }
        Ok(Duration::new(count, unit.parse()?))
    }
}
