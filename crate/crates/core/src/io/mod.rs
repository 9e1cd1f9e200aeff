//! Scenarios, run configuration, persistence and job orchestration.

mod config;
mod orchestrate;
mod scenario;
mod snapshot;
mod timeseries;

pub use config::{load_config, OutputPaths, RunConfig};
pub use orchestrate::{
    run_batch, run_job, JobOutcome, REPORT_FILE, SNAPSHOT_FILE, TIMESERIES_FILE, TRAJECTORY_FILE,
};
pub use scenario::{scenario_build, Geometry, ScenarioSpec};
pub use snapshot::{
    read_trajectory, resume_snapshot, write_frame, write_snapshot, write_trajectory, FrameSnapshot,
    GridDescriptor, Snapshot,
};
pub use timeseries::{read_timeseries, timeseries_rows, write_timeseries, TimeseriesRow};

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::analysis::VerificationReport;
use crate::error::{FlowError, Result};

/// Version written to and required of every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

pub fn write_report(report: &VerificationReport, path: &Path) -> Result<()> {
    report.write(path)
}

/// Key named by a serde message such as "unknown field `x`, expected ...".
fn quoted(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

/// Parses a versioned document; every mismatch becomes a schema error naming
/// the offending key by its dotted path.
pub(crate) fn parse_versioned<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("schema_version").map(|v| v.as_u64()) {
        Some(Some(v)) if v == SCHEMA_VERSION as u64 => {}
        Some(_) => {
            return Err(FlowError::Schema {
                key: "schema_version".into(),
                detail: format!(
                    "expected {SCHEMA_VERSION}, found {}",
                    value["schema_version"]
                ),
            })
        }
        None => {
            return Err(FlowError::Schema {
                key: "schema_version".into(),
                detail: "missing".into(),
            })
        }
    }
    serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.inner().to_string();
        // missing fields, and unknown ones inside tagged enums, leave the path at the parent
        let field = quoted(&msg)
            .filter(|_| msg.starts_with("missing field") || msg.starts_with("unknown field"));
        let key = match field {
            Some(k) if path == "." => k.to_string(),
            Some(k) if path.rsplit('.').next() != Some(k) => format!("{path}.{k}"),
            _ => path,
        };
        FlowError::Schema { key, detail: msg }
    })
}
