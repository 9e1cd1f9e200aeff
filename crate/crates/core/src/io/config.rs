//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{Analysis, SuiteOptions};
use crate::error::{FlowError, Result};
use crate::solver::DtPolicy;

use super::scenario::ScenarioSpec;
use super::{parse_versioned, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Directory owned by the job; created when missing.
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub dt_policy: DtPolicy,
    /// End of the simulation and the time the analyses measure at.
    pub t_end: f64,
    /// Extra snapshot times; the analyses add the ones they need.
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub suite: SuiteOptions,
    /// Flat volume below which the run stops; one grid cell's ball when absent.
    #[serde(default)]
    pub vol_floor: Option<f64>,
    pub output: OutputPaths,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(scenario: ScenarioSpec, t_end: f64, dir: impl Into<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario,
            dt_policy: DtPolicy::default(),
            t_end,
            sample_times: Vec::new(),
            analyses: Vec::new(),
            suite: SuiteOptions::default(),
            vol_floor: None,
            output: OutputPaths { dir: dir.into() },
            seed: 0,
        }
    }

    /// Sample times sorted and inside `[0, t_end]`.
    pub fn validate(&self) -> Result<()> {
        let schema = |key: &str, detail: String| {
            Err(FlowError::Schema {
                key: key.into(),
                detail,
            })
        };
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return schema("t_end", format!("{} must be finite and >= 0", self.t_end));
        }
        if !(self.dt_policy.cfl > 0.0) {
            return schema(
                "dt_policy.cfl",
                format!("{} must be positive", self.dt_policy.cfl),
            );
        }
        if self.sample_times.windows(2).any(|w| !(w[1] >= w[0])) {
            return schema("sample_times", "must be sorted".into());
        }
        if let Some(t) = self
            .sample_times
            .iter()
            .find(|&&t| !(t >= 0.0 && t <= self.t_end))
        {
            return schema(
                "sample_times",
                format!("{t} lies outside [0, {}]", self.t_end),
            );
        }
        if let Some(v) = self.vol_floor.filter(|v| !(*v > 0.0)) {
            return schema("vol_floor", format!("{v} must be positive"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = parse_versioned(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "scenario": {
            "name": "disk",
            "geometry": {"kind": "radial_flat_disk", "flat_radius": 1.0, "amplitude": 1.0},
            "grid": 128, "n": 2, "p": 1.0
        },
        "t_end": 0.05,
        "analyses": ["exponent", "kinematics"],
        "output": {"dir": "out"}
    }"#;

    fn key(text: &str) -> String {
        match RunConfig::from_json(text) {
            Err(FlowError::Schema { key, .. }) => key,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.dt_policy, DtPolicy::default());
        assert_eq!(c.suite, SuiteOptions::default());
        assert_eq!(c.analyses, vec![Analysis::Exponent, Analysis::Kinematics]);
        assert_eq!(RunConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn mismatches_name_the_key() {
        assert_eq!(
            key(&MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 0")),
            "schema_version"
        );
        assert_eq!(key(&MINIMAL.replace("\"t_end\"", "\"t_stop\"")), "t_stop");
        assert_eq!(
            key(&MINIMAL.replace("\"grid\"", "\"grid_size\"")),
            "scenario.grid_size"
        );
        assert_eq!(
            key(&MINIMAL.replace("\"amplitude\"", "\"amp\"")),
            "scenario.geometry.amp"
        );
        assert_eq!(
            key(&MINIMAL.replace("\"exponent\"", "\"exponents\"")),
            "analyses[0]"
        );
        assert_eq!(
            key(&MINIMAL.replace(
                "\"t_end\": 0.05,",
                "\"t_end\": 0.05, \"sample_times\": [0.1],"
            )),
            "sample_times"
        );
        assert_eq!(
            key(&MINIMAL.replace("\"output\": {\"dir\": \"out\"}", "\"output\": {}")),
            "output.dir"
        );
    }
}
