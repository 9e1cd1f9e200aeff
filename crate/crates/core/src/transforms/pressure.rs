//! Pressure `g = ((sigma+1)/sigma * v)^{sigma/(sigma+1)}` and the residual of its equation.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::{map_indexed, Exec};
use crate::params::FlowParams;
use crate::solver::State;

use super::Residual;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureField {
    /// Same grid as the source state, holding `g`.
    pub field: State,
    pub sigma_p: f64,
}

impl PressureField {
    pub fn time(&self) -> f64 {
        self.field.time()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }
}

#[inline]
pub fn pressure_of(v: f64, sigma: f64) -> f64 {
    ((sigma + 1.0) / sigma * v).powf(sigma / (sigma + 1.0))
}

#[inline]
pub fn height_of(g: f64, sigma: f64) -> f64 {
    sigma / (sigma + 1.0) * g.powf((sigma + 1.0) / sigma)
}

pub fn to_pressure(state: &State, params: &FlowParams) -> Result<PressureField> {
    let sigma = params.require_sigma_positive()?;
    if let Some((i, &v)) = state
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0))
    {
        return Err(FlowError::NegativeHeight { index: i, value: v });
    }
    let g = state
        .values()
        .iter()
        .map(|&v| pressure_of(v, sigma))
        .collect();
    Ok(PressureField {
        field: state.with_values(g, state.time()),
        sigma_p: sigma,
    })
}

pub fn from_pressure(gfield: &PressureField, params: &FlowParams) -> Result<State> {
    let sigma = params.require_sigma_positive()?;
    if let Some((i, &g)) = gfield
        .values()
        .iter()
        .enumerate()
        .find(|(_, g)| !(**g >= 0.0))
    {
        return Err(FlowError::NegativeHeight { index: i, value: g });
    }
    let v = gfield
        .values()
        .iter()
        .map(|&g| height_of(g, sigma))
        .collect();
    Ok(gfield.field.with_values(v, gfield.time()))
}

/// `(g det(D^2 g + Dg (x) Dg / (sigma g)))^p / (1 + g^{2/sigma} |Dg|^2)^a` from
/// the pressure value, gradient and Hessian.
#[inline]
pub fn pressure_speed(g: f64, grad: &[f64], hess: &[f64], params: &FlowParams) -> f64 {
    let sigma = params.sigma_p;
    let n = grad.len();
    let mut m = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = g * hess[i * n + j] + grad[i] * grad[j] / sigma;
        }
    }
    // g det(D^2 g + ...) = det(g D^2 g + ...) / g^{n-1}
    let det = match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => det3(&m),
    } / g.powi(n as i32 - 1);
    let grad2: f64 = grad.iter().map(|d| d * d).sum();
    det.max(0.0).powf(params.p)
        / (1.0 + g.powf(2.0 / sigma) * grad2).powf(params.gradient_exponent())
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Radial form: `(g g_rr + g_r^2 / sigma) (g_r / rho)^{n-1}` over the gradient factor.
#[inline]
pub fn pressure_speed_radial(g: f64, g_r: f64, g_rr: f64, rho: f64, params: &FlowParams) -> f64 {
    let sigma = params.sigma_p;
    let tangential = if rho == 0.0 { g_rr } else { g_r / rho };
    let det = (g * g_rr + g_r * g_r / sigma) * tangential.max(0.0).powi(params.n as i32 - 1);
    det.max(0.0).powf(params.p)
        / (1.0 + g.powf(2.0 / sigma) * g_r * g_r).powf(params.gradient_exponent())
}

/// Spatial side of the pressure equation at every node with `g > delta`
/// and a full central stencil; `None` elsewhere.
pub fn pressure_rhs(gfield: &PressureField, params: &FlowParams, delta: f64) -> Vec<Option<f64>> {
    pressure_rhs_with(gfield, params, delta, Exec::default())
}

pub(crate) fn pressure_rhs_with(
    gfield: &PressureField,
    params: &FlowParams,
    delta: f64,
    exec: Exec,
) -> Vec<Option<f64>> {
    match &gfield.field {
        State::Radial(r) => {
            let (g, h) = (&r.values, r.step);
            map_indexed(exec, g.len(), |i| {
                if i + 1 >= g.len() || !(g[i] > delta) {
                    return None;
                }
                let (g_r, g_rr) = if i == 0 {
                    (0.0, 2.0 * (g[1] - g[0]) / (h * h))
                } else {
                    (
                        (g[i + 1] - g[i - 1]) / (2.0 * h),
                        (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h),
                    )
                };
                Some(pressure_speed_radial(g[i], g_r, g_rr, r.rho(i), params))
            })
        }
        State::Graph(grid) => {
            let (nx, ny, h) = (grid.nx, grid.ny, grid.step);
            map_indexed(exec, nx * ny, |k| {
                let (i, j) = (k % nx, k / nx);
                if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny || !(grid.at(i, j) > delta) {
                    return None;
                }
                let c = grid.at(i, j);
                let gx = (grid.at(i + 1, j) - grid.at(i - 1, j)) / (2.0 * h);
                let gy = (grid.at(i, j + 1) - grid.at(i, j - 1)) / (2.0 * h);
                let gxx = (grid.at(i + 1, j) - 2.0 * c + grid.at(i - 1, j)) / (h * h);
                let gyy = (grid.at(i, j + 1) - 2.0 * c + grid.at(i, j - 1)) / (h * h);
                let gxy = (grid.at(i + 1, j + 1) - grid.at(i + 1, j - 1) - grid.at(i - 1, j + 1)
                    + grid.at(i - 1, j - 1))
                    / (4.0 * h * h);
                Some(pressure_speed(c, &[gx, gy], &[gxx, gxy, gxy, gyy], params))
            })
        }
    }
}

/// `g_t - rhs(g)` on `{g > delta}`; other nodes are skipped and counted.
pub fn residual_pressure(
    gfield: &PressureField,
    g_t: &[f64],
    params: &FlowParams,
    delta: f64,
) -> Result<Residual> {
    if g_t.len() != gfield.values().len() {
        return Err(FlowError::invalid(format!(
            "g_t has {} entries, field has {}",
            g_t.len(),
            gfield.values().len()
        )));
    }
    if matches!(gfield.field, State::Graph(_)) && params.n != 2 {
        return Err(FlowError::Unsupported(
            "2-D pressure fields require n = 2".into(),
        ));
    }
    let rhs = pressure_rhs(gfield, params, delta);
    Ok(Residual::collect(
        rhs.into_iter()
            .enumerate()
            .map(|(k, f)| f.map(|f| (k, g_t[k] - f))),
    ))
}
