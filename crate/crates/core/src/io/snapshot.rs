//! JSON snapshots and JSON-lines trajectories.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::params::FlowParams;
use crate::solver::{GraphGrid, RadialProfile, State};
use crate::transforms::TransformFrame;

use super::{parse_versioned, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridDescriptor {
    Radial {
        step: f64,
        nodes: usize,
    },
    Graph {
        origin: [f64; 2],
        step: f64,
        nx: usize,
        ny: usize,
    },
}

/// One state on disk. `values` is row-major (`x` fastest) on 2-D grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub schema_version: u32,
    pub params: FlowParams,
    pub grid: GridDescriptor,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn new(state: &State, params: &FlowParams) -> Self {
        let grid = match state {
            State::Radial(r) => GridDescriptor::Radial {
                step: r.step,
                nodes: r.len(),
            },
            State::Graph(g) => GridDescriptor::Graph {
                origin: g.origin,
                step: g.step,
                nx: g.nx,
                ny: g.ny,
            },
        };
        Self {
            schema_version: SCHEMA_VERSION,
            params: *params,
            grid,
            time: state.time(),
            values: state.values().to_vec(),
        }
    }

    pub fn to_state(&self) -> Result<State> {
        let count = match self.grid {
            GridDescriptor::Radial { nodes, .. } => nodes,
            GridDescriptor::Graph { nx, ny, .. } => nx * ny,
        };
        if count != self.values.len() {
            return Err(FlowError::Schema {
                key: "values".into(),
                detail: format!("{} entries for a grid of {count} nodes", self.values.len()),
            });
        }
        Ok(match self.grid {
            GridDescriptor::Radial { step, .. } => {
                State::Radial(RadialProfile::new(step, self.values.clone(), self.time)?)
            }
            GridDescriptor::Graph {
                origin,
                step,
                nx,
                ny,
            } => State::Graph(GraphGrid::new(
                origin,
                step,
                nx,
                ny,
                self.values.clone(),
                self.time,
            )?),
        })
    }

    fn check(&self) -> Result<()> {
        let sigma = self.params.n as f64 - 1.0 / self.params.p;
        if (sigma - self.params.sigma_p).abs() > 1e-12 * sigma.abs().max(1.0) {
            return Err(FlowError::Schema {
                key: "params.sigma_p".into(),
                detail: format!("{} disagrees with n - 1/p = {sigma}", self.params.sigma_p),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        if let Some((i, &v)) = self.values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(FlowError::NonFinite {
                location: format!("snapshot node {i}"),
                value: v,
            });
        }
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Snapshot = parse_versioned(text)?;
        s.check()?;
        Ok(s)
    }
}

/// A derived field in the snapshot envelope, tagged by `frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSnapshot {
    pub schema_version: u32,
    pub params: FlowParams,
    #[serde(flatten)]
    pub frame: TransformFrame,
}

impl FrameSnapshot {
    pub fn new(frame: TransformFrame, params: &FlowParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            params: *params,
            frame,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse_versioned(text)
    }
}

pub fn write_snapshot(path: &Path, state: &State, params: &FlowParams) -> Result<()> {
    std::fs::write(path, Snapshot::new(state, params).to_json()? + "\n")?;
    Ok(())
}

pub fn write_frame(path: &Path, frame: &FrameSnapshot) -> Result<()> {
    std::fs::write(path, serde_json::to_string(frame)? + "\n")?;
    Ok(())
}

/// One snapshot per line.
pub fn write_trajectory(path: &Path, states: &[State], params: &FlowParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in states {
        writeln!(w, "{}", Snapshot::new(s, params).to_json()?)?;
    }
    w.flush()?;
    Ok(())
}

/// States of a JSON-lines trajectory, with the parameters of its first line.
pub fn read_trajectory(path: &Path) -> Result<(Vec<State>, FlowParams)> {
    let mut states = Vec::new();
    let mut params = None;
    for (k, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let snap = Snapshot::from_json(&line).map_err(|e| match e {
            FlowError::Schema { key, detail } => FlowError::Schema {
                key,
                detail: format!("line {}: {detail}", k + 1),
            },
            e => e,
        })?;
        if *params.get_or_insert(snap.params) != snap.params {
            return Err(FlowError::Schema {
                key: "params".into(),
                detail: format!("line {} changes the parameters", k + 1),
            });
        }
        states.push(snap.to_state()?);
    }
    let params = params.ok_or(FlowError::InsufficientSamples {
        usable: 0,
        required: 1,
    })?;
    Ok((states, params))
}

/// The state to continue from: a snapshot file, or the last line of a trajectory.
pub fn resume_snapshot(path: &Path) -> Result<(State, FlowParams)> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let (mut states, params) = read_trajectory(path)?;
        let last = states.pop().ok_or(FlowError::InsufficientSamples {
            usable: 0,
            required: 1,
        })?;
        return Ok((last, params));
    }
    let snap = Snapshot::from_json(&std::fs::read_to_string(path)?)?;
    Ok((snap.to_state()?, snap.params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;

    #[test]
    fn bit_exact_round_trip() {
        let p = derive_exponents(2, 0.75).unwrap();
        let vals = vec![
            0.0,
            1.0 / 3.0,
            2f64.sqrt(),
            1e-300,
            5e-324,
            0.1 + 0.2,
            f64::MAX,
            123456.789e-7,
        ];
        let s = State::Radial(RadialProfile::new(0.1, vals, 0.05).unwrap());
        let text = Snapshot::new(&s, &p).to_json().unwrap();
        let back = Snapshot::from_json(&text).unwrap();
        let bits = |s: &State| s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.to_state().unwrap()), bits(&s));
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn schema_errors_name_the_key() {
        let p = derive_exponents(2, 1.0).unwrap();
        let s = State::Radial(RadialProfile::new(0.1, vec![0.0; 5], 0.0).unwrap());
        let text = Snapshot::new(&s, &p).to_json().unwrap();
        let key = |t: &str| match Snapshot::from_json(t) {
            Err(FlowError::Schema { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(
            key(&text.replace("\"schema_version\":1", "\"schema_version\":2")),
            "schema_version"
        );
        assert_eq!(key(&text.replace("\"time\"", "\"tyme\"")), "tyme");
        assert_eq!(key(&text.replace("\"step\"", "\"stride\"")), "grid.stride");
        let bad = Snapshot::from_json(&text.replace("\"nodes\":5", "\"nodes\":6")).unwrap();
        assert!(matches!(bad.to_state(), Err(FlowError::Schema { .. })));
    }

    #[test]
    fn non_finite_values_are_refused() {
        let p = derive_exponents(2, 1.0).unwrap();
        let s = State::Radial(RadialProfile::new(0.1, vec![0.0, 1.0, f64::NAN, 2.0], 0.0).unwrap());
        assert!(matches!(
            Snapshot::new(&s, &p).to_json(),
            Err(FlowError::NonFinite { .. })
        ));
    }
}
