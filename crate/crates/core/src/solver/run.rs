//! Adaptive explicit time loop with sampling and flat-side tracking.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::Exec;
use crate::params::FlowParams;

use super::interface::{extract_interface, flat_volume, InterfaceState};
use super::rhs::rhs_with;
use super::step::{advance, DEFAULT_CFL};
use super::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtPolicy {
    pub cfl: f64,
    /// Optional hard cap on the step.
    pub max_dt: Option<f64>,
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self {
            cfl: DEFAULT_CFL,
            max_dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub dt_policy: DtPolicy,
    pub t_end: f64,
    /// Times at which snapshots are recorded; the loop lands on them exactly.
    pub sample_times: Vec<f64>,
    pub eps_int: f64,
    /// Stop once the flat volume drops below this value; `None` disables tracking.
    pub vol_floor: Option<f64>,
    pub exec: Exec,
}

impl RunOptions {
    pub fn new(t_end: f64, sample_times: Vec<f64>) -> Self {
        Self {
            dt_policy: DtPolicy::default(),
            t_end,
            sample_times,
            eps_int: 1e-6,
            vol_floor: None,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub interfaces: Vec<InterfaceState>,
    /// Interpolated time at which the flat volume crossed the floor.
    pub t_star: Option<f64>,
    pub steps: usize,
    pub stopped_early: bool,
}

impl Trajectory {
    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&State> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.time() - t).abs().total_cmp(&(b.time() - t).abs()))
    }
}

/// A failed run: the fault and everything recorded before it.
#[derive(Debug)]
pub struct RunFault {
    pub error: FlowError,
    pub last_good: State,
    pub partial: Trajectory,
}

impl std::fmt::Display for RunFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (last good snapshot at t = {})",
            self.error,
            self.last_good.time()
        )
    }
}

impl std::error::Error for RunFault {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn validate(initial: &State, options: &RunOptions) -> Result<Vec<f64>> {
    let t0 = initial.time();
    if !(options.t_end >= t0) || !options.t_end.is_finite() {
        return Err(FlowError::invalid(format!(
            "t_end {} must be finite and >= {t0}",
            options.t_end
        )));
    }
    if !(options.dt_policy.cfl > 0.0) {
        return Err(FlowError::invalid(format!(
            "CFL constant {} must be positive",
            options.dt_policy.cfl
        )));
    }
    if let Some(m) = options.dt_policy.max_dt {
        if !(m > 0.0) {
            return Err(FlowError::invalid(format!("max_dt {m} must be positive")));
        }
    }
    if options.sample_times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(FlowError::invalid("sample times must be sorted"));
    }
    if let Some(&t) = options
        .sample_times
        .iter()
        .find(|&&t| t < t0 || t > options.t_end)
    {
        return Err(FlowError::invalid(format!(
            "sample time {t} outside [{t0}, {}]",
            options.t_end
        )));
    }
    initial.check_finite()?;
    Ok(options.sample_times.clone())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

/// Evolves `initial` to `options.t_end`, recording snapshots at the sample
/// times. `callback` sees every recorded snapshot.
pub fn run_flow(
    initial: &State,
    params: &FlowParams,
    options: &RunOptions,
    mut callback: Option<&mut dyn FnMut(&State, Option<&InterfaceState>)>,
) -> std::result::Result<Trajectory, RunFault> {
    let mut traj = Trajectory {
        snapshots: Vec::new(),
        interfaces: Vec::new(),
        t_star: None,
        steps: 0,
        stopped_early: false,
    };
    let fault = |error: FlowError, last: &State, traj: Trajectory| RunFault {
        error,
        last_good: last.clone(),
        partial: traj,
    };

    let samples = match validate(initial, options) {
        Ok(s) => s,
        Err(e) => return Err(fault(e, initial, traj)),
    };
    let n = params.n;
    let mut state = initial.clone();
    let mut next = 0usize;
    let mut prev_vol = options
        .vol_floor
        .map(|_| (state.time(), flat_volume(&state, n, options.eps_int)));

    let mut record = |state: &State, traj: &mut Trajectory| -> Result<()> {
        let iface = match options.vol_floor {
            Some(_) => Some(extract_interface(state, n, options.eps_int)?),
            None => None,
        };
        if let Some(cb) = callback.as_deref_mut() {
            cb(state, iface.as_ref());
        }
        traj.snapshots.push(state.clone());
        traj.interfaces.extend(iface);
        Ok(())
    };

    while next < samples.len() && close(state.time(), samples[next]) {
        if let Err(e) = record(&state, &mut traj) {
            return Err(fault(e, &state, traj));
        }
        next += 1;
    }

    while state.time() < options.t_end && !close(state.time(), options.t_end) {
        let speed = match rhs_with(&state, params, options.exec) {
            Ok(s) => s,
            Err(e) => return Err(fault(e, &state, traj)),
        };
        let mut dt =
            super::step::stable_dt_with(&state, params, options.dt_policy.cfl, options.exec);
        if let Some(m) = options.dt_policy.max_dt {
            dt = dt.min(m);
        }
        let target = samples.get(next).copied().unwrap_or(options.t_end);
        dt = dt
            .min(target - state.time())
            .min(options.t_end - state.time());
        if !(dt > 0.0) {
            let e = FlowError::invalid(format!(
                "time step collapsed to {dt} at t = {}",
                state.time()
            ));
            return Err(fault(e, &state, traj));
        }
        let mut new_state = advance(&state, &speed, dt);
        if close(new_state.time(), target) {
            new_state.set_time(target);
        }
        if let Err(e) = new_state.check_finite() {
            return Err(fault(e, &state, traj));
        }
        state = new_state;
        traj.steps += 1;

        let mut stop = false;
        if let (Some(floor), Some((t_prev, v_prev))) = (options.vol_floor, prev_vol) {
            let vol = flat_volume(&state, n, options.eps_int);
            if vol < floor {
                traj.t_star = Some(crossing(t_prev, v_prev, state.time(), vol, floor));
                stop = true;
            }
            prev_vol = Some((state.time(), vol));
        }

        while next < samples.len() && close(state.time(), samples[next]) {
            if let Err(e) = record(&state, &mut traj) {
                return Err(fault(e, &state, traj));
            }
            next += 1;
        }
        if stop {
            if traj.snapshots.last().map(|s| s.time()) != Some(state.time()) {
                if let Err(e) = record(&state, &mut traj) {
                    return Err(fault(e, &state, traj));
                }
            }
            traj.stopped_early = true;
            break;
        }
    }
    Ok(traj)
}

fn crossing(t0: f64, v0: f64, t1: f64, v1: f64, floor: f64) -> f64 {
    if v0 <= floor || v0 == v1 {
        return t0;
    }
    t0 + (v0 - floor) / (v0 - v1) * (t1 - t0)
}

/// First time the recorded flat volume crosses `vol_floor`, linearly
/// interpolated between samples; `None` if never reached.
pub fn estimate_tstar(interfaces: &[InterfaceState], vol_floor: f64) -> Option<f64> {
    let first = interfaces.first()?;
    if first.flat_volume < vol_floor {
        return Some(first.time);
    }
    interfaces
        .windows(2)
        .find(|w| w[1].flat_volume < vol_floor)
        .map(|w| {
            crossing(
                w[0].time,
                w[0].flat_volume,
                w[1].time,
                w[1].flat_volume,
                vol_floor,
            )
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;
    use crate::solver::{sphere_cap_profile, sphere_exact_radius, RadialProfile};

    fn iface(t: f64, v: f64) -> InterfaceState {
        InterfaceState {
            time: t,
            flat_volume: v,
            contour: vec![],
            inner_radius: 0.0,
            outer_radius: 0.0,
        }
    }

    #[test]
    fn tstar_interpolates_first_crossing() {
        let s = [
            iface(0.0, 2.0),
            iface(1.0, 1.0),
            iface(2.0, 0.0),
            iface(3.0, 0.0),
        ];
        assert!((estimate_tstar(&s, 0.5).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(estimate_tstar(&s[..2], 0.5), None);
        assert_eq!(estimate_tstar(&[], 0.5), None);
    }

    #[test]
    fn lands_on_sample_times() {
        let params = derive_exponents(2, 1.0).unwrap();
        let r = sphere_cap_profile(1.0, 1.0, 0.5, 41, 0.0).unwrap();
        let opts = RunOptions::new(0.02, vec![0.0, 0.01, 0.02]);
        let traj = run_flow(&State::Radial(r), &params, &opts, None).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time()).collect();
        assert_eq!(times, vec![0.0, 0.01, 0.02]);
        let exact = 1.0 - sphere_exact_radius(&params, 1.0, 0.02).unwrap();
        assert!((traj.snapshots[2].apex_height() - exact).abs() < 0.05 * exact);
    }

    #[test]
    fn serial_and_parallel_runs_agree() {
        let params = derive_exponents(2, 1.0).unwrap();
        let r = RadialProfile::from_fn(2.0, 101, 0.0, |rho| (rho - 1.0).max(0.0).powi(2)).unwrap();
        let mut opts = RunOptions::new(0.01, vec![0.01]);
        opts.exec = Exec::Serial;
        let a = run_flow(&State::Radial(r.clone()), &params, &opts, None).unwrap();
        opts.exec = Exec::Parallel;
        let b = run_flow(&State::Radial(r), &params, &opts, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fault_keeps_last_good_snapshot() {
        let params = derive_exponents(2, 1.0).unwrap();
        let mut r = RadialProfile::from_fn(1.0, 21, 0.0, |rho| rho * rho).unwrap();
        r.values[7] = f64::INFINITY;
        let opts = RunOptions::new(0.1, vec![]);
        let err = run_flow(&State::Radial(r), &params, &opts, None).unwrap_err();
        assert_eq!(err.last_good.time(), 0.0);
    }

    #[test]
    fn stops_when_flat_side_closes() {
        let params = derive_exponents(2, 1.0).unwrap();
        let r = RadialProfile::from_fn(1.0, 41, 0.0, |rho| (rho - 0.1).max(0.0).powi(2)).unwrap();
        let mut opts = RunOptions::new(1.0, vec![0.0]);
        opts.vol_floor = Some(1e-3);
        let traj = run_flow(&State::Radial(r), &params, &opts, None).unwrap();
        assert!(traj.stopped_early);
        let t = traj.t_star.unwrap();
        assert!(t > 0.0 && t < 0.05, "{t}");
        assert_eq!(traj.interfaces.len(), traj.snapshots.len());
    }
}
