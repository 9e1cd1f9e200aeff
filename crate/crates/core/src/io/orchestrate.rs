//! One job: build or resume, evolve, analyse, persist. Batches run jobs in parallel.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{verify_trajectory, VerificationReport};
use crate::error::{FlowError, Result};
use crate::par::{map_indexed, Exec};
use crate::params::FlowParams;
use crate::solver::{run_flow, unit_ball_volume, RunOptions, State, DEFAULT_EPS_INT};

use super::config::RunConfig;
use super::scenario::scenario_build;
use super::snapshot::{read_trajectory, resume_snapshot, write_snapshot, write_trajectory};
use super::timeseries::write_timeseries;

pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SNAPSHOT_FILE: &str = "final.json";
const LAST_GOOD_FILE: &str = "last_good.json";
const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub name: String,
    pub dir: PathBuf,
    pub report: VerificationReport,
    pub passed: bool,
    pub snapshots: usize,
    pub t_star: Option<f64>,
}

/// Initial state, its parameters and any history before it.
fn starting_point(
    config: &RunConfig,
    resume: Option<&Path>,
) -> Result<(State, FlowParams, Vec<State>)> {
    match resume {
        None => {
            let (s, p) = scenario_build(&config.scenario)?;
            Ok((s, p, Vec::new()))
        }
        Some(path) if path.extension().is_some_and(|e| e == "jsonl") => {
            let (mut states, p) = read_trajectory(path)?;
            let last = states.pop().ok_or(FlowError::InsufficientSamples {
                usable: 0,
                required: 1,
            })?;
            Ok((last, p, states))
        }
        Some(path) => {
            let (s, p) = resume_snapshot(path)?;
            Ok((s, p, Vec::new()))
        }
    }
}

fn merge_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let set: BTreeSet<u64> = a.iter().chain(b).map(|t| t.to_bits()).collect();
    let mut out: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Runs one configuration into `config.output.dir`. A resumed run continues
/// from a snapshot or from the last line of a trajectory, whose earlier lines
/// are kept as history.
pub fn run_job(config: &RunConfig, resume: Option<&Path>) -> Result<JobOutcome> {
    config.validate()?;
    let dir = &config.output.dir;
    std::fs::create_dir_all(dir)?;
    let (initial, params, history) = starting_point(config, resume)?;
    if (params.n, params.p) != (config.scenario.n, config.scenario.p) {
        return Err(FlowError::Schema {
            key: "scenario.p".into(),
            detail: format!("resumed state has n = {}, p = {}", params.n, params.p),
        });
    }
    let params = params.with_horizon(config.t_end)?;
    let t0 = initial.time();
    let mut suite = config.suite.clone();
    suite.seed = config.seed;

    let required = if config.analyses.is_empty() {
        Vec::new()
    } else {
        params.require_sigma_positive()?;
        suite.required_times(&config.analyses, config.t_end)
    };
    if let Some(t) = required.iter().find(|&&t| t < 0.0) {
        return Err(FlowError::invalid(format!(
            "analyses need a snapshot at t = {t} < 0; increase t_end"
        )));
    }
    let ends = [t0, config.t_end.max(t0)];
    let mut times = merge_times(&merge_times(&config.sample_times, &required), &ends);
    times.retain(|&t| t >= t0 && history.iter().all(|s| s.time() != t));
    let mut options = RunOptions::new(
        times
            .last()
            .copied()
            .unwrap_or(t0)
            .max(config.t_end)
            .max(t0),
        times,
    );
    options.dt_policy = config.dt_policy;
    options.eps_int = DEFAULT_EPS_INT;
    let vol_floor = config
        .vol_floor
        .unwrap_or(unit_ball_volume(params.n) * initial.step().powi(params.n as i32));
    if config.scenario.has_flat_side() {
        options.vol_floor = Some(vol_floor);
    }
    std::fs::write(dir.join(CONFIG_FILE), config.to_json()? + "\n")?;

    let traj = match run_flow(&initial, &params, &options, None) {
        Ok(t) => t,
        Err(fault) => {
            let mut states = history;
            states.extend(fault.partial.snapshots);
            write_trajectory(&dir.join(TRAJECTORY_FILE), &states, &params)?;
            write_snapshot(&dir.join(LAST_GOOD_FILE), &fault.last_good, &params)?;
            return Err(fault.error);
        }
    };
    let t_star = traj.t_star;
    let mut states = history;
    states.extend(traj.snapshots);

    write_trajectory(&dir.join(TRAJECTORY_FILE), &states, &params)?;
    write_timeseries(&states, params.n, vol_floor, &dir.join(TIMESERIES_FILE))?;
    if let Some(last) = states.last() {
        write_snapshot(&dir.join(SNAPSHOT_FILE), last, &params)?;
    }
    let report = if config.analyses.is_empty() {
        VerificationReport::new(config.seed)
    } else {
        verify_trajectory(&states, &params, config.t_end, &config.analyses, &suite)?
    };
    report.write(&dir.join(REPORT_FILE))?;
    Ok(JobOutcome {
        name: config.scenario.name.clone(),
        dir: dir.clone(),
        passed: report.passed(),
        report,
        snapshots: states.len(),
        t_star,
    })
}

/// Independent jobs, each in its own output directory.
pub fn run_batch(configs: &[RunConfig], exec: Exec) -> Result<Vec<Result<JobOutcome>>> {
    let dirs: BTreeSet<&PathBuf> = configs.iter().map(|c| &c.output.dir).collect();
    if dirs.len() != configs.len() {
        return Err(FlowError::invalid(
            "batch jobs must use distinct output directories",
        ));
    }
    Ok(map_indexed(exec, configs.len(), |k| {
        run_job(&configs[k], None)
    }))
}
