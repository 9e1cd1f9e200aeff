use crate::error::{FlowError, Result};
use crate::par::{max_indexed, Exec};
use crate::params::FlowParams;

use super::rhs::{graph_derivatives, radial_derivatives, rhs_with, EPS_FLAT};
use super::{GraphGrid, RadialProfile, State};

pub const DEFAULT_CFL: f64 = 0.4;

#[inline]
fn linearized_coefficient(det: f64, cofactor_trace: f64, gradient_factor: f64, p: f64) -> f64 {
    if det > 0.0 {
        p * det.powf(p - 1.0) * cofactor_trace / gradient_factor
    } else if p == 1.0 {
        cofactor_trace / gradient_factor
    } else {
        0.0
    }
}

fn radial_max_coefficient(r: &RadialProfile, params: &FlowParams, exec: Exec) -> f64 {
    let n = params.n as i32;
    let a = params.gradient_exponent();
    let v = &r.values;
    max_indexed(exec, v.len() - 1, |i| {
        if v[i] <= EPS_FLAT && v[i + 1] <= EPS_FLAT {
            return f64::NAN;
        }
        let (v_r, v_rr) = radial_derivatives(v, r.step, i);
        let v_rr = v_rr.max(0.0);
        let t = if i == 0 {
            v_rr
        } else {
            (v_r / r.rho(i)).max(0.0)
        };
        let det = v_rr * t.powi(n - 1);
        let cof = t.powi(n - 1) + (n - 1) as f64 * v_rr * t.powi((n - 2).max(0));
        linearized_coefficient(det, cof, (1.0 + v_r * v_r).powf(a), params.p)
    })
    .unwrap_or(0.0)
}

fn graph_max_coefficient(g: &GraphGrid, params: &FlowParams, exec: Exec) -> f64 {
    let a = params.gradient_exponent();
    let (nx, ny) = (g.nx, g.ny);
    max_indexed(exec, nx * ny, |k| {
        let (i, j) = (k % nx, k / nx);
        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 || g.at(i, j) <= EPS_FLAT {
            return f64::NAN;
        }
        let ([xx, xy, yy], grad) = graph_derivatives(g, i, j);
        let det = xx * yy - xy * xy;
        let gf = (1.0 + grad[0] * grad[0] + grad[1] * grad[1]).powf(a);
        linearized_coefficient(det, xx.max(0.0) + yy.max(0.0), gf, params.p)
    })
    .unwrap_or(0.0)
}

/// Largest linearized diffusion coefficient over the non-flat cells.
pub fn max_parabolic_coefficient(state: &State, params: &FlowParams) -> f64 {
    match state {
        State::Radial(r) => radial_max_coefficient(r, params, Exec::default()),
        State::Graph(g) => graph_max_coefficient(g, params, Exec::default()),
    }
}

/// `cfl * step^2 / max coefficient`; infinite when nothing moves.
pub fn stable_dt(state: &State, params: &FlowParams, cfl: f64) -> f64 {
    stable_dt_with(state, params, cfl, Exec::default())
}

pub(crate) fn stable_dt_with(state: &State, params: &FlowParams, cfl: f64, exec: Exec) -> f64 {
    let c = match state {
        State::Radial(r) => radial_max_coefficient(r, params, exec),
        State::Graph(g) => graph_max_coefficient(g, params, exec),
    };
    if c > 0.0 {
        cfl * state.step() * state.step() / c
    } else {
        f64::INFINITY
    }
}

/// Forward-Euler step with the baseline CFL constant.
pub fn step_explicit(state: &State, params: &FlowParams, dt: f64) -> Result<State> {
    step_explicit_with(state, params, dt, DEFAULT_CFL)
}

pub fn step_explicit_with(state: &State, params: &FlowParams, dt: f64, cfl: f64) -> Result<State> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(FlowError::invalid(format!(
            "time step {dt} must be finite and >= 0"
        )));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let limit = stable_dt(state, params, cfl);
    if dt > limit * (1.0 + 1e-12) {
        return Err(FlowError::CflViolation {
            dt,
            suggested: limit,
        });
    }
    let speed = rhs_with(state, params, Exec::default())?;
    Ok(advance(state, &speed, dt))
}

pub(crate) fn advance(state: &State, speed: &[f64], dt: f64) -> State {
    let values = state
        .values()
        .iter()
        .zip(speed)
        .map(|(v, s)| v + dt * s)
        .collect();
    let mut next = state.with_values(values, state.time() + dt);
    if let State::Graph(g) = &mut next {
        g.restore_convexity();
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;
    use crate::solver::RadialProfile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn paraboloid_euler_step() {
        // coarse grid so that dt = 0.01 is admissible
        let r = RadialProfile::from_fn(2.0, 5, 0.0, |rho| 0.5 * rho * rho).unwrap();
        let params = derive_exponents(2, 1.0).unwrap();
        let next = step_explicit(&State::Radial(r), &params, 0.01).unwrap();
        assert_abs_diff_eq!(next.values()[0], 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(next.time(), 0.01);
    }

    #[test]
    fn zero_step_is_identity() {
        let r = RadialProfile::from_fn(2.0, 50, 0.3, |rho| rho.powi(4)).unwrap();
        let s = State::Radial(r);
        assert_eq!(
            step_explicit(&s, &derive_exponents(2, 1.0).unwrap(), 0.0).unwrap(),
            s
        );
    }

    #[test]
    fn cfl_violation_suggests_dt() {
        let r = RadialProfile::from_fn(1.0, 101, 0.0, |rho| 0.5 * rho * rho).unwrap();
        let s = State::Radial(r);
        let params = derive_exponents(2, 1.0).unwrap();
        match step_explicit(&s, &params, 1.0) {
            Err(FlowError::CflViolation { suggested, .. }) => {
                assert!(suggested > 0.0 && suggested < 1e-3);
                assert!(step_explicit(&s, &params, suggested).is_ok());
            }
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn flat_interior_is_untouched() {
        let r = RadialProfile::from_fn(2.0, 201, 0.0, |rho| (rho - 1.0).max(0.0).powi(2)).unwrap();
        let s = State::Radial(r);
        let params = derive_exponents(2, 1.0).unwrap();
        let dt = stable_dt(&s, &params, DEFAULT_CFL);
        let next = step_explicit(&s, &params, dt).unwrap();
        // nodes 0..=98 see only zeros in their stencil
        assert!(next.values()[..99].iter().all(|&v| v == 0.0));
        assert!(next.values().iter().zip(s.values()).all(|(a, b)| a >= b));
    }
}
