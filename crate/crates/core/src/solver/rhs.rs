//! Right-hand side of `v_t = (det D^2 v)^p / (1 + |Dv|^2)^{((n+2)p-1)/2}`.

use crate::error::{FlowError, Result};
use crate::par::{map_indexed, Exec};
use crate::params::FlowParams;

use super::{GraphGrid, RadialProfile, State};

/// Cells at or below this height count as flat when choosing stencils.
pub const EPS_FLAT: f64 = 1e-12;

/// Pointwise speed for rotationally symmetric data. At `rho == 0` the
/// tangential factor `V_rho / rho` is replaced by its limit `V_rhorho`.
#[inline]
pub fn radial_speed(v_r: f64, v_rr: f64, rho: f64, params: &FlowParams) -> f64 {
    let tangential = if rho == 0.0 { v_rr } else { v_r / rho };
    let det = v_rr.max(0.0) * tangential.max(0.0).powi(params.n as i32 - 1);
    det.powf(params.p) / (1.0 + v_r * v_r).powf(params.gradient_exponent())
}

/// Pointwise speed in two space dimensions from the Hessian entries and gradient.
#[inline]
pub fn graph_speed(v_xx: f64, v_xy: f64, v_yy: f64, grad: [f64; 2], params: &FlowParams) -> f64 {
    let det = (v_xx * v_yy - v_xy * v_xy).max(0.0);
    det.powf(params.p)
        / (1.0 + grad[0] * grad[0] + grad[1] * grad[1]).powf(params.gradient_exponent())
}

/// Radial first and second differences at node `i` (interior or origin).
///
/// The last flat node next to a positive neighbour uses the one-sided second
/// difference pointing into the positive side.
#[inline]
pub(crate) fn radial_derivatives(v: &[f64], h: f64, i: usize) -> (f64, f64) {
    if i == 0 {
        return (0.0, 2.0 * (v[1] - v[0]) / (h * h));
    }
    let (l, c, r) = (v[i - 1], v[i], v[i + 1]);
    let v_r = (r - l) / (2.0 * h);
    let v_rr = if c <= EPS_FLAT && r > EPS_FLAT && l <= EPS_FLAT && i + 2 < v.len() {
        (c - 2.0 * r + v[i + 2]) / (h * h)
    } else if c <= EPS_FLAT && l > EPS_FLAT && r <= EPS_FLAT && i >= 2 {
        (c - 2.0 * l + v[i - 2]) / (h * h)
    } else {
        (r - 2.0 * c + l) / (h * h)
    };
    (v_r, v_rr)
}

pub fn rhs_radial(state: &RadialProfile, params: &FlowParams) -> Result<Vec<f64>> {
    rhs_radial_with(state, params, Exec::default())
}

pub(crate) fn rhs_radial_with(
    state: &RadialProfile,
    params: &FlowParams,
    exec: Exec,
) -> Result<Vec<f64>> {
    let v = &state.values;
    let h = state.step;
    let last = v.len() - 1;
    let mut out = map_indexed(exec, v.len(), |i| {
        if i == last {
            return 0.0;
        }
        let (v_r, v_rr) = radial_derivatives(v, h, i);
        radial_speed(v_r, v_rr, state.rho(i), params)
    });
    out[last] = (3.0 * out[last - 1] - 3.0 * out[last - 2] + out[last - 3]).max(0.0);
    check_field(&out, |i| format!("rho = {}", state.rho(i)))?;
    Ok(out)
}

#[inline]
fn second_diff_axis(
    c: f64,
    minus: f64,
    plus: f64,
    minus2: Option<f64>,
    plus2: Option<f64>,
    h2: f64,
) -> f64 {
    if c <= EPS_FLAT && plus > EPS_FLAT && minus <= EPS_FLAT {
        if let Some(p2) = plus2 {
            return (c - 2.0 * plus + p2) / h2;
        }
    }
    if c <= EPS_FLAT && minus > EPS_FLAT && plus <= EPS_FLAT {
        if let Some(m2) = minus2 {
            return (c - 2.0 * minus + m2) / h2;
        }
    }
    (plus - 2.0 * c + minus) / h2
}

/// Hessian entries and gradient at an interior node of a 2-D grid.
#[inline]
pub(crate) fn graph_derivatives(g: &GraphGrid, i: usize, j: usize) -> ([f64; 3], [f64; 2]) {
    let h = g.step;
    let h2 = h * h;
    let c = g.at(i, j);
    let (xm, xp) = (g.at(i - 1, j), g.at(i + 1, j));
    let (ym, yp) = (g.at(i, j - 1), g.at(i, j + 1));
    let xm2 = (i >= 2).then(|| g.at(i - 2, j));
    let xp2 = (i + 2 < g.nx).then(|| g.at(i + 2, j));
    let ym2 = (j >= 2).then(|| g.at(i, j - 2));
    let yp2 = (j + 2 < g.ny).then(|| g.at(i, j + 2));
    let v_xx = second_diff_axis(c, xm, xp, xm2, xp2, h2);
    let v_yy = second_diff_axis(c, ym, yp, ym2, yp2, h2);
    let v_xy = (g.at(i + 1, j + 1) - g.at(i + 1, j - 1) - g.at(i - 1, j + 1) + g.at(i - 1, j - 1))
        / (4.0 * h2);
    (
        [v_xx, v_xy, v_yy],
        [(xp - xm) / (2.0 * h), (yp - ym) / (2.0 * h)],
    )
}

pub fn rhs_graph(state: &GraphGrid, params: &FlowParams) -> Result<Vec<f64>> {
    rhs_graph_with(state, params, Exec::default())
}

pub(crate) fn rhs_graph_with(
    state: &GraphGrid,
    params: &FlowParams,
    exec: Exec,
) -> Result<Vec<f64>> {
    if params.n != 2 {
        return Err(FlowError::Unsupported(format!(
            "2-D graph grids require n = 2 (got n = {})",
            params.n
        )));
    }
    let (nx, ny) = (state.nx, state.ny);
    let out = map_indexed(exec, nx * ny, |k| {
        let (i, j) = (k % nx, k / nx);
        let (i, j) = (i.clamp(1, nx - 2), j.clamp(1, ny - 2));
        let ([xx, xy, yy], grad) = graph_derivatives(state, i, j);
        graph_speed(xx, xy, yy, grad, params)
    });
    check_field(&out, |k| {
        let p = state.point(k % nx, k / nx);
        format!("y = ({}, {})", p[0], p[1])
    })?;
    Ok(out)
}

pub fn rhs(state: &State, params: &FlowParams) -> Result<Vec<f64>> {
    rhs_with(state, params, Exec::default())
}

pub fn rhs_with(state: &State, params: &FlowParams, exec: Exec) -> Result<Vec<f64>> {
    match state {
        State::Radial(r) => rhs_radial_with(r, params, exec),
        State::Graph(g) => rhs_graph_with(g, params, exec),
    }
}

fn check_field(values: &[f64], locate: impl Fn(usize) -> String) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(FlowError::NonFinite {
            location: locate(k),
            value: values[k],
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;
    use approx::assert_abs_diff_eq;

    fn p21() -> FlowParams {
        derive_exponents(2, 1.0).unwrap()
    }

    #[test]
    fn paraboloid_graph_rhs() {
        let g = GraphGrid::from_fn(2.0, 41, 0.0, |y| 0.5 * (y[0] * y[0] + y[1] * y[1])).unwrap();
        let f = rhs_graph(&g, &p21()).unwrap();
        // node (20, 20) is the origin; (30, 20) is y = (1, 0)
        assert_abs_diff_eq!(f[g.idx(20, 20)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[g.idx(30, 20)], 2f64.powf(-1.5), epsilon = 1e-12);
    }

    #[test]
    fn paraboloid_radial_rhs() {
        let r = RadialProfile::from_fn(2.0, 21, 0.0, |rho| 0.5 * rho * rho).unwrap();
        let f = rhs_radial(&r, &p21()).unwrap();
        assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[10], 2f64.powf(-1.5), epsilon = 1e-12);
    }

    #[test]
    fn flat_patch_has_zero_speed() {
        let r = RadialProfile::from_fn(2.0, 41, 0.0, |_| 0.0).unwrap();
        assert!(rhs_radial(&r, &p21()).unwrap().iter().all(|&v| v == 0.0));
        let g = GraphGrid::from_fn(1.0, 11, 0.0, |_| 0.0).unwrap();
        assert!(rhs_graph(&g, &p21()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn graph_rejects_higher_dimension() {
        let g = GraphGrid::from_fn(1.0, 11, 0.0, |_| 0.0).unwrap();
        assert!(matches!(
            rhs_graph(&g, &derive_exponents(3, 1.0).unwrap()),
            Err(FlowError::Unsupported(_))
        ));
    }

    #[test]
    fn non_finite_is_located() {
        let mut r = RadialProfile::from_fn(1.0, 11, 0.0, |rho| rho * rho).unwrap();
        r.values[5] = f64::NAN;
        let err = rhs_radial(&r, &p21()).unwrap_err();
        assert!(matches!(err, FlowError::NonFinite { .. }), "{err}");
    }

    #[test]
    fn one_sided_at_last_flat_node() {
        // V = ((rho - 1)_+)^2 sampled so that node 10 is the last flat node.
        let r = RadialProfile::from_fn(2.0, 21, 0.0, |rho| (rho - 1.0).max(0.0).powi(2)).unwrap();
        let (_, v_rr) = radial_derivatives(&r.values, r.step, 10);
        // forward difference of (0, h^2, 4h^2) is 2
        assert_abs_diff_eq!(v_rr, 2.0, epsilon = 1e-12);
        let (_, v_rr) = radial_derivatives(&r.values, r.step, 9);
        assert_eq!(v_rr, 0.0);
    }
}
