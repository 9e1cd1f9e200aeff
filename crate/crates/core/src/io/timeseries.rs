//! Per-snapshot scalar series as CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::solver::{estimate_tstar, extract_interface, State, DEFAULT_EPS_INT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub t: f64,
    pub apex_height: f64,
    pub flat_volume: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// First crossing of the volume floor seen so far; empty until then.
    #[serde(rename = "Tstar_estimate")]
    pub tstar_estimate: Option<f64>,
}

pub fn timeseries_rows(states: &[State], n: usize, vol_floor: f64) -> Result<Vec<TimeseriesRow>> {
    let ifaces = states
        .iter()
        .map(|s| extract_interface(s, n, DEFAULT_EPS_INT))
        .collect::<Result<Vec<_>>>()?;
    Ok(states
        .iter()
        .zip(&ifaces)
        .enumerate()
        .map(|(k, (s, i))| TimeseriesRow {
            t: s.time(),
            apex_height: s.apex_height(),
            flat_volume: i.flat_volume,
            inner_radius: i.inner_radius,
            outer_radius: i.outer_radius,
            tstar_estimate: estimate_tstar(&ifaces[..=k], vol_floor),
        })
        .collect())
}

pub fn write_timeseries(states: &[State], n: usize, vol_floor: f64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in timeseries_rows(states, n, vol_floor)? {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timeseries(path: &Path) -> Result<Vec<TimeseriesRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::RadialProfile;

    #[test]
    fn header_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let states: Vec<State> = [0.0, 0.5]
            .iter()
            .map(|&t| {
                State::Radial(
                    RadialProfile::from_fn(2.0, 201, t, |rho| (rho - 1.0 + t).max(0.0).powi(2))
                        .unwrap(),
                )
            })
            .collect();
        write_timeseries(&states, 2, 1.0, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text
            .starts_with("t,apex_height,flat_volume,inner_radius,outer_radius,Tstar_estimate\n"));
        let rows = read_timeseries(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].flat_volume - std::f64::consts::PI).abs() < 0.05);
        assert!(rows[1].inner_radius < rows[0].inner_radius);
        assert_eq!(rows[0].tstar_estimate, None);
        assert_eq!(rows, timeseries_rows(&states, 2, 1.0).unwrap());
    }
}
