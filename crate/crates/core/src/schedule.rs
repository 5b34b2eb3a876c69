//! Release calendar and import-freeze-triggered backport rounds.

use std::fmt;

use chrono::NaiveDate;
use thiserror::Error;

use crate::deb822::{parse_stanzas, Deb822Error};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("BadVersionString: {0:?}")]
    BadVersionString(String),
    #[error("NotAnLts: {0}")]
    NotAnLts(String),
    #[error("UnknownTarget: {0}")]
    UnknownTarget(String),
    #[error("calendar is not in chronological order at {0}")]
    Unsorted(String),
    #[error("calendar entry {index}: {reason}")]
    BadEntry { index: usize, reason: String },
    #[error(transparent)]
    Syntax(#[from] Deb822Error),
}

/// Release number as (year, month), e.g. 12.04 -> (12, 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReleaseNumber {
    pub year: u32,
    pub month: u32,
}

impl ReleaseNumber {
    pub fn parse(text: &str) -> Result<Self, ScheduleError> {
        let bad = || ScheduleError::BadVersionString(text.to_string());
        let (yy, mm) = text.split_once('.').ok_or_else(bad)?;
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !(digits(yy) && yy.len() <= 2 && digits(mm) && mm.len() == 2) {
            return Err(bad());
        }
        let month: u32 = mm.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(Self {
            year: yy.parse().map_err(|_| bad())?,
            month,
        })
    }

    /// Months since year 0 of the numbering scheme.
    pub fn months(self) -> u32 {
        self.year * 12 + self.month
    }

    pub fn is_lts(self) -> bool {
        (self.month == 4 && self.year.is_multiple_of(2)) || (self.year == 6 && self.month == 6)
    }
}

impl fmt::Display for ReleaseNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.year, self.month)
    }
}

pub fn is_lts(version: &str) -> Result<bool, ScheduleError> {
    Ok(ReleaseNumber::parse(version)?.is_lts())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleaseMilestone {
    pub version: String,
    pub codename: Option<String>,
    pub release_date: NaiveDate,
    pub import_freeze: Option<NaiveDate>,
    pub is_lts: bool,
}

impl ReleaseMilestone {
    pub fn new(version: &str, codename: Option<&str>, release_date: NaiveDate) -> Result<Self, ScheduleError> {
        let number = ReleaseNumber::parse(version)?;
        let special = number == (ReleaseNumber { year: 6, month: 6 });
        if !(special || number.month == 4 || number.month == 10) {
            return Err(ScheduleError::BadVersionString(version.to_string()));
        }
        Ok(Self {
            version: version.to_string(),
            codename: codename.map(str::to_string),
            release_date,
            import_freeze: None,
            is_lts: number.is_lts(),
        })
    }

    pub fn with_import_freeze(mut self, date: NaiveDate) -> Self {
        self.import_freeze = Some(date);
        self
    }

    pub fn number(&self) -> ReleaseNumber {
        ReleaseNumber::parse(&self.version).expect("validated on construction")
    }

    /// Date a round triggered by this milestone starts.
    pub fn trigger_date(&self) -> NaiveDate {
        self.import_freeze.unwrap_or(self.release_date)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    pub trigger: ReleaseMilestone,
    pub target_lts: String,
    pub ordinal: usize,
}

fn parse_date(index: usize, field: &str, value: &str) -> Result<NaiveDate, ScheduleError> {
    NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d").map_err(|e| ScheduleError::BadEntry {
        index,
        reason: format!("{field}: {e}"),
    })
}

/// Calendar file: stanzas with Version, Codename, Release-Date and an
/// optional Import-Freeze. Must be in chronological order.
pub fn parse_calendar(text: &str) -> Result<Vec<ReleaseMilestone>, ScheduleError> {
    let calendar = parse_stanzas(text)?
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let field = |name: &str| {
                s.get(name).ok_or_else(|| ScheduleError::BadEntry {
                    index,
                    reason: format!("missing {name}"),
                })
            };
            let version = field("Version")?.trim();
            let release = parse_date(index, "Release-Date", field("Release-Date")?)?;
            let mut m = ReleaseMilestone::new(version, s.get("Codename").map(str::trim), release)?;
            if let Some(freeze) = s.get("Import-Freeze") {
                m.import_freeze = Some(parse_date(index, "Import-Freeze", freeze)?);
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>, ScheduleError>>()?;
    check_sorted(&calendar)?;
    Ok(calendar)
}

fn check_sorted(calendar: &[ReleaseMilestone]) -> Result<(), ScheduleError> {
    for pair in calendar.windows(2) {
        if pair[1].number() <= pair[0].number() || pair[1].release_date <= pair[0].release_date {
            return Err(ScheduleError::Unsorted(pair[1].version.clone()));
        }
    }
    Ok(())
}

const DEFAULT_CALENDAR: &str = include_str!("default_calendar.deb822");

/// Releases 6.06 through 16.04. Import-freeze dates are not included.
pub fn default_calendar() -> Vec<ReleaseMilestone> {
    parse_calendar(DEFAULT_CALENDAR).expect("bundled calendar is valid")
}

pub fn find_by_codename<'a>(calendar: &'a [ReleaseMilestone], codename: &str) -> Option<&'a ReleaseMilestone> {
    calendar.iter().find(|m| m.codename.as_deref() == Some(codename))
}

/// One round per milestone after `target_lts`, up to and including the
/// next LTS.
pub fn plan_rounds(calendar: &[ReleaseMilestone], target_lts: &str) -> Result<Vec<RoundPlan>, ScheduleError> {
    let target = ReleaseNumber::parse(target_lts)?;
    if !target.is_lts() {
        return Err(ScheduleError::NotAnLts(target_lts.to_string()));
    }
    check_sorted(calendar)?;
    let start = calendar
        .iter()
        .position(|m| m.number() == target)
        .ok_or_else(|| ScheduleError::UnknownTarget(target_lts.to_string()))?;

    let mut triggers = Vec::new();
    for m in &calendar[start + 1..] {
        triggers.push(m.clone());
        if m.is_lts {
            break;
        }
    }
    triggers.sort_by_key(ReleaseMilestone::trigger_date);
    Ok(triggers
        .into_iter()
        .enumerate()
        .map(|(i, trigger)| RoundPlan {
            trigger,
            target_lts: calendar[start].version.clone(),
            ordinal: i + 1,
        })
        .collect())
}

/// Earliest milestone whose import freeze is on or after `today`.
pub fn next_trigger(calendar: &[ReleaseMilestone], today: NaiveDate) -> Option<&ReleaseMilestone> {
    calendar
        .iter()
        .filter(|m| m.import_freeze.is_some_and(|f| f >= today))
        .min_by_key(|m| m.import_freeze)
}
