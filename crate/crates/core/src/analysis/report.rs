//! Verdicts and the JSON verification report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::fit::ExponentFit;
use super::holder::{HigherHolderReport, HolderReport};

/// One measured quantity against its thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            passed,
            measured: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            note: None,
        }
    }

    pub fn measure(mut self, key: &str, value: f64) -> Self {
        self.measured.insert(key.into(), value);
        self
    }

    pub fn threshold(mut self, key: &str, value: f64) -> Self {
        self.thresholds.insert(key.into(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Passes iff `low <= min` and `max <= high`; fails when nothing was measured.
    pub fn range(
        name: impl Into<String>,
        values: impl IntoIterator<Item = f64>,
        low: f64,
        high: f64,
    ) -> Self {
        let (mut min, mut max, mut count, mut nan) =
            (f64::INFINITY, f64::NEG_INFINITY, 0usize, 0usize);
        for v in values {
            if v.is_nan() {
                nan += 1;
                continue;
            }
            min = min.min(v);
            max = max.max(v);
            count += 1;
        }
        let passed = count > 0 && nan == 0 && min >= low && max <= high;
        let mut check = Check::new(name, passed)
            .threshold("low", low)
            .threshold("high", high)
            .measure("count", count as f64);
        if nan > 0 {
            check = check.measure("nan", nan as f64);
        }
        if count == 0 {
            check.note("no points measured")
        } else {
            check.measure("min", min).measure("max", max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub checks: Vec<Check>,
}

impl ConditionReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub fit: ExponentFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub name: String,
    pub sup: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HolderEntry {
    Plain(HolderReport),
    Higher(HigherHolderReport),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub fits: Vec<NamedFit>,
    pub conditions: Vec<ConditionReport>,
    pub holder: Vec<(String, HolderEntry)>,
    pub residuals: Vec<ResidualSummary>,
    pub statistics: BTreeMap<String, f64>,
    /// Pass/fail thresholds are engineering defaults, not constants from the theory.
    pub thresholds_are_defaults: bool,
    pub seed: u64,
}

impl VerificationReport {
    pub fn new(seed: u64) -> Self {
        Self {
            thresholds_are_defaults: true,
            seed,
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.fits.iter().all(|f| f.passed) && self.conditions.iter().all(ConditionReport::passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}
