//! Discrete Legendre transform `u(x) = max_y (y . x - v(y))` on polar x-grids,
//! and the residual of the dual equation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::{map_indexed, Exec};
use crate::params::FlowParams;
use crate::solver::{State, DEFAULT_EPS_INT};

use super::Residual;

/// `n_theta x radii` polar nodes; `radii` strictly increasing and nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub thetas: Vec<f64>,
    pub radii: Vec<f64>,
}

impl PolarGrid {
    pub fn new(n_theta: usize, radii: Vec<f64>) -> Result<Self> {
        if n_theta == 0 {
            return Err(FlowError::invalid("polar grid needs at least one angle"));
        }
        if radii.len() < 3 {
            return Err(FlowError::invalid("polar grid needs at least 3 radii"));
        }
        if radii[0] < 0.0
            || radii.windows(2).any(|w| !(w[1] > w[0]))
            || !radii.iter().all(|r| r.is_finite())
        {
            return Err(FlowError::invalid(
                "polar radii must be finite, nonnegative and increasing",
            ));
        }
        let thetas = (0..n_theta)
            .map(|k| 2.0 * PI * k as f64 / n_theta as f64)
            .collect();
        Ok(Self { thetas, radii })
    }

    /// `n_r` radii evenly spaced on `[0, r_max]`.
    pub fn uniform(n_theta: usize, n_r: usize, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0) || n_r < 3 {
            return Err(FlowError::invalid(format!(
                "bad polar grid: n_r = {n_r}, r_max = {r_max}"
            )));
        }
        Self::new(
            n_theta,
            (0..n_r)
                .map(|j| r_max * j as f64 / (n_r - 1) as f64)
                .collect(),
        )
    }

    /// Radii `r = s^{2/sigma}` for `n_s` values of `s` evenly spaced on `[s_min, s_max]`.
    pub fn for_zeta(
        n_theta: usize,
        s_min: f64,
        s_max: f64,
        n_s: usize,
        sigma: f64,
    ) -> Result<Self> {
        if !(s_min > 0.0 && s_max > s_min && sigma > 0.0) || n_s < 3 {
            return Err(FlowError::invalid(format!(
                "bad zeta grid: s in [{s_min}, {s_max}], n_s = {n_s}"
            )));
        }
        let h = (s_max - s_min) / (n_s - 1) as f64;
        Self::new(
            n_theta,
            (0..n_s)
                .map(|j| (s_min + j as f64 * h).powf(2.0 / sigma))
                .collect(),
        )
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_r(&self) -> usize {
        self.radii.len()
    }

    pub fn point(&self, k: usize, j: usize) -> [f64; 2] {
        let (s, c) = self.thetas[k].sin_cos();
        [self.radii[j] * c, self.radii[j] * s]
    }

    fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.n_theta() * self.n_r());
        for k in 0..self.n_theta() {
            for j in 0..self.n_r() {
                out.push(self.point(k, j));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreField {
    pub grid: PolarGrid,
    /// `values[k * n_r + j]` at angle `k`, radius `j`.
    pub values: Vec<f64>,
    /// Flat-side volume `c_t` of the source.
    pub center_mass: f64,
    pub time: f64,
    /// Source was rotationally symmetric, so every ray carries the same values.
    pub radial: bool,
    pub n: usize,
}

impl LegendreField {
    pub fn at(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.grid.n_r() + j]
    }

    pub fn ray(&self, k: usize) -> &[f64] {
        let m = self.grid.n_r();
        &self.values[k * m..(k + 1) * m]
    }

    /// `(u_r, u_rr, u_xixi)` at interior radius `j` on ray `k`, with `xi`
    /// the unit tangent orthogonal to `x`.
    pub fn polar_derivatives(&self, k: usize, j: usize) -> Option<(f64, f64, f64)> {
        let r = &self.grid.radii;
        if j == 0 || j + 1 >= r.len() || r[j] <= 0.0 {
            return None;
        }
        let ray = self.ray(k);
        let (u_r, u_rr) = nonuniform(
            ray[j - 1],
            ray[j],
            ray[j + 1],
            r[j] - r[j - 1],
            r[j + 1] - r[j],
        );
        let u_tt = if self.radial {
            0.0
        } else {
            self.theta_second(k, j)
        };
        Some((u_r, u_rr, u_r / r[j] + u_tt / (r[j] * r[j])))
    }

    fn theta_step(&self) -> f64 {
        2.0 * PI / self.grid.n_theta() as f64
    }

    fn theta_second(&self, k: usize, j: usize) -> f64 {
        let m = self.grid.n_theta();
        let h = self.theta_step();
        (self.at((k + 1) % m, j) - 2.0 * self.at(k, j) + self.at((k + m - 1) % m, j)) / (h * h)
    }

    fn theta_first(&self, k: usize, j: usize) -> f64 {
        let m = self.grid.n_theta();
        (self.at((k + 1) % m, j) - self.at((k + m - 1) % m, j)) / (2.0 * self.theta_step())
    }

    /// `det D^2 u` at node `(k, j)` from polar differences.
    pub fn hessian_det(&self, k: usize, j: usize) -> Option<f64> {
        let (u_r, u_rr, tangential) = self.polar_derivatives(k, j)?;
        if self.radial {
            return Some(u_rr * tangential.powi(self.n as i32 - 1));
        }
        let r = &self.grid.radii;
        let m = self.grid.n_theta();
        let h_m = r[j] - r[j - 1];
        let h_p = r[j + 1] - r[j];
        let ut = |jj: usize| {
            (self.at((k + 1) % m, jj) - self.at((k + m - 1) % m, jj)) / (2.0 * self.theta_step())
        };
        let (u_rt, _) = nonuniform(ut(j - 1), ut(j), ut(j + 1), h_m, h_p);
        let cross = u_rt / r[j] - self.theta_first(k, j) / (r[j] * r[j]);
        let _ = u_r;
        Some(u_rr * tangential - cross * cross)
    }
}

/// First and second derivatives from three samples with spacings `h_m`, `h_p`.
#[inline]
pub(crate) fn nonuniform(f_m: f64, f: f64, f_p: f64, h_m: f64, h_p: f64) -> (f64, f64) {
    let den = h_m * h_p * (h_m + h_p);
    let d1 = (h_m * h_m * f_p - h_p * h_p * f_m - (h_m * h_m - h_p * h_p) * f) / den;
    let d2 = 2.0 * (h_m * f_p - (h_m + h_p) * f + h_p * f_m) / den;
    (d1, d2)
}

const BLOCK: usize = 8;

struct Block {
    start: usize,
    end: usize,
    center: [f64; 2],
    half: [f64; 2],
    vmin: f64,
}

/// Points regrouped into compact tiles for bounding.
struct Tiled {
    points: Vec<[f64; 2]>,
    values: Vec<f64>,
    blocks: Vec<Block>,
}

fn tile(points: &[[f64; 2]], values: &[f64], chunk: usize) -> Tiled {
    let mut blocks = Vec::new();
    let mut start = 0;
    while start < points.len() {
        let end = (start + chunk).min(points.len());
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        let mut vmin = f64::INFINITY;
        for k in start..end {
            for d in 0..2 {
                lo[d] = lo[d].min(points[k][d]);
                hi[d] = hi[d].max(points[k][d]);
            }
            if !values[k].is_nan() {
                vmin = vmin.min(values[k]);
            }
        }
        blocks.push(Block {
            start,
            end,
            center: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
            half: [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])],
            vmin,
        });
        start = end;
    }
    Tiled {
        points: points.to_vec(),
        values: values.to_vec(),
        blocks,
    }
}

#[inline]
fn term(x: [f64; 2], y: [f64; 2], v: f64) -> f64 {
    (x[0] * y[0] + x[1] * y[1]) - v
}

impl Tiled {
    fn conjugate(&self, x: [f64; 2]) -> f64 {
        let mut bounds: Vec<(f64, f64, usize)> = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.vmin < f64::INFINITY)
            .map(|(i, b)| {
                let lin = x[0] * b.center[0] + x[1] * b.center[1];
                let spread = x[0].abs() * b.half[0] + x[1].abs() * b.half[1];
                let bound = lin + spread - b.vmin;
                // rounding slack for both the bound and the terms it dominates
                let scale = x[0].abs() * (b.center[0].abs() + b.half[0])
                    + x[1].abs() * (b.center[1].abs() + b.half[1])
                    + b.vmin.abs();
                (bound, 1e-12 * (scale + 1.0), i)
            })
            .collect();
        bounds.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best = f64::NEG_INFINITY;
        for (bound, slack, i) in bounds {
            if bound + slack < best {
                break;
            }
            let b = &self.blocks[i];
            for k in b.start..b.end {
                best = best.max(term(x, self.points[k], self.values[k]));
            }
        }
        best + 0.0
    }
}

/// Conjugate of the point cloud `(points, values)` at every query, using
/// block bounds to skip dominated tiles. Bit-identical to the naive sup.
/// Points are tiled in the order given, so spatially coherent orderings prune best.
pub fn conjugate_points(
    points: &[[f64; 2]],
    values: &[f64],
    queries: &[[f64; 2]],
    exec: Exec,
) -> Result<Vec<f64>> {
    if points.len() != values.len() {
        return Err(FlowError::invalid("points and values differ in length"));
    }
    let tiled = tile(points, values, BLOCK * BLOCK);
    Ok(map_indexed(exec, queries.len(), |q| {
        tiled.conjugate(queries[q])
    }))
}

pub fn conjugate_points_naive(
    points: &[[f64; 2]],
    values: &[f64],
    queries: &[[f64; 2]],
) -> Vec<f64> {
    queries
        .iter()
        .map(|&x| {
            points
                .iter()
                .zip(values)
                .fold(f64::NEG_INFINITY, |best, (&y, &v)| best.max(term(x, y, v)))
                + 0.0
        })
        .collect()
}

// `max` of signed zeros depends on the order; `+ 0.0` maps -0 to +0.
fn radial_conjugate(rho: &[f64], values: &[f64], r: f64) -> f64 {
    rho.iter()
        .zip(values)
        .fold(f64::NEG_INFINITY, |best, (&y, &v)| best.max(y * r - v))
        + 0.0
}

/// Grid nodes reordered into `BLOCK x BLOCK` tiles.
fn tiled_graph_points(g: &crate::solver::GraphGrid) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut pts = Vec::with_capacity(g.nx * g.ny);
    let mut vals = Vec::with_capacity(g.nx * g.ny);
    for bj in (0..g.ny).step_by(BLOCK) {
        for bi in (0..g.nx).step_by(BLOCK) {
            for j in bj..(bj + BLOCK).min(g.ny) {
                for i in bi..(bi + BLOCK).min(g.nx) {
                    pts.push(g.point(i, j));
                    vals.push(g.at(i, j));
                }
            }
        }
    }
    (pts, vals)
}

pub fn legendre_transform(
    state: &State,
    grid: &PolarGrid,
    params: &FlowParams,
) -> Result<LegendreField> {
    legendre_transform_with(state, grid, params, Exec::default())
}

pub fn legendre_transform_with(
    state: &State,
    grid: &PolarGrid,
    params: &FlowParams,
    exec: Exec,
) -> Result<LegendreField> {
    let center_mass =
        crate::solver::extract_interface(state, params.n, DEFAULT_EPS_INT)?.flat_volume;
    let (values, radial) = match state {
        State::Radial(r) => {
            let rho: Vec<f64> = (0..r.len()).map(|i| r.rho(i)).collect();
            let ray = map_indexed(exec, grid.n_r(), |j| {
                radial_conjugate(&rho, &r.values, grid.radii[j])
            });
            (ray.repeat(grid.n_theta()), true)
        }
        State::Graph(g) => {
            if params.n != 2 {
                return Err(FlowError::Unsupported(
                    "2-D graph grids require n = 2".into(),
                ));
            }
            let (pts, vals) = tiled_graph_points(g);
            (conjugate_points(&pts, &vals, &grid.points(), exec)?, false)
        }
    };
    Ok(LegendreField {
        grid: grid.clone(),
        values,
        center_mass,
        time: state.time(),
        radial,
        n: params.n,
    })
}

/// The defining sup evaluated over every grid node in storage order.
pub fn legendre_brute_force(state: &State, grid: &PolarGrid) -> Vec<f64> {
    match state {
        State::Radial(r) => {
            let rho: Vec<f64> = (0..r.len()).map(|i| r.rho(i)).collect();
            let ray: Vec<f64> = grid
                .radii
                .iter()
                .map(|&x| radial_conjugate(&rho, &r.values, x))
                .collect();
            ray.repeat(grid.n_theta())
        }
        State::Graph(g) => {
            let pts: Vec<[f64; 2]> = (0..g.nx * g.ny)
                .map(|k| g.point(k % g.nx, k / g.nx))
                .collect();
            conjugate_points_naive(&pts, &g.values, &grid.points())
        }
    }
}

/// Spatial side of the dual equation written for `u_t`:
/// `u_t = -(det D^2 u)^{-p} (1 + |x|^2)^{-a}`, on radii within `[r_min, r_max]`.
pub fn dual_rhs(
    ufield: &LegendreField,
    params: &FlowParams,
    r_min: f64,
    r_max: f64,
) -> Vec<Option<f64>> {
    let a = params.gradient_exponent();
    let m = ufield.grid.n_r();
    (0..ufield.values.len())
        .map(|idx| {
            let (k, j) = (idx / m, idx % m);
            let r = ufield.grid.radii[j];
            if !(r >= r_min && r <= r_max) || r <= 0.0 {
                return None;
            }
            let det = ufield.hessian_det(k, j)?;
            (det > 0.0).then(|| -det.powf(-params.p) * (1.0 + r * r).powf(-a))
        })
        .collect()
}

/// `u_t - dual_rhs(u)`; faults where `u_t >= 0` on an evaluated node.
pub fn residual_dual(
    ufield: &LegendreField,
    u_t: &[f64],
    params: &FlowParams,
    r_min: f64,
    r_max: f64,
) -> Result<Residual> {
    if !(r_min > 0.0) {
        return Err(FlowError::invalid(format!(
            "r_min {r_min} must be positive"
        )));
    }
    if u_t.len() != ufield.values.len() {
        return Err(FlowError::invalid(
            "u_t and the Legendre field differ in size",
        ));
    }
    let rhs = dual_rhs(ufield, params, r_min, r_max);
    let m = ufield.grid.n_r();
    for (idx, f) in rhs.iter().enumerate() {
        if f.is_some() && !(u_t[idx] < 0.0) {
            return Err(FlowError::NonShrinking {
                location: format!(
                    "theta = {}, r = {}",
                    ufield.grid.thetas[idx / m],
                    ufield.grid.radii[idx % m]
                ),
                value: u_t[idx],
            });
        }
    }
    Ok(Residual::collect(
        rhs.into_iter()
            .enumerate()
            .map(|(k, f)| f.map(|f| (k, u_t[k] - f))),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;
    use crate::solver::{GraphGrid, RadialProfile};
    use approx::assert_abs_diff_eq;

    fn p21() -> FlowParams {
        derive_exponents(2, 1.0).unwrap()
    }

    #[test]
    fn quadratic_is_self_dual() {
        let g = GraphGrid::from_fn(2.0, 81, 0.0, |y| 0.5 * (y[0] * y[0] + y[1] * y[1])).unwrap();
        let grid = PolarGrid::uniform(16, 11, 1.0).unwrap();
        let u = legendre_transform(&State::Graph(g.clone()), &grid, &p21()).unwrap();
        for k in 0..16 {
            for j in 0..11 {
                let r = grid.radii[j];
                assert!(
                    (u.at(k, j) - 0.5 * r * r).abs() <= g.step * g.step,
                    "{k} {j}"
                );
            }
        }
    }

    #[test]
    fn flat_ball_gives_support_function() {
        let r = RadialProfile::from_fn(1.5, 151, 0.0, |_| 0.0).unwrap();
        let grid = PolarGrid::uniform(4, 21, 1.0).unwrap();
        let u = legendre_transform(&State::Radial(r), &grid, &p21()).unwrap();
        for j in 0..21 {
            assert_abs_diff_eq!(u.at(3, j), 1.5 * grid.radii[j], epsilon = 1e-14);
        }
        assert_abs_diff_eq!(u.center_mass, PI * 1.5 * 1.5, epsilon = 1e-12);
    }

    #[test]
    fn production_matches_brute_force_bitwise() {
        let g = GraphGrid::from_fn(2.0, 64, 0.0, |y| {
            ((y[0] * y[0] + y[1] * y[1]).sqrt() - 1.0).max(0.0).powi(2)
        })
        .unwrap();
        let s = State::Graph(g);
        let grid = PolarGrid::uniform(24, 17, 1.0).unwrap();
        let fast = legendre_transform(&s, &grid, &p21()).unwrap();
        let slow = legendre_brute_force(&s, &grid);
        assert!(fast
            .values
            .iter()
            .zip(&slow)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(fast.at(0, 0), 0.0);
    }

    #[test]
    fn origin_value_is_minus_min() {
        let r = RadialProfile::from_fn(2.0, 101, 0.0, |rho| 0.3 + rho * rho).unwrap();
        let u = legendre_transform(
            &State::Radial(r),
            &PolarGrid::uniform(1, 5, 1.0).unwrap(),
            &p21(),
        )
        .unwrap();
        assert_eq!(u.at(0, 0), -0.3);
    }

    #[test]
    fn nonuniform_differences_are_exact_on_quadratics() {
        let f = |x: f64| 3.0 * x * x - x + 2.0;
        let (d1, d2) = nonuniform(f(0.9), f(1.0), f(1.3), 0.1, 0.3);
        assert_abs_diff_eq!(d1, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d2, 6.0, epsilon = 1e-11);
    }

    #[test]
    fn dual_residual_zero_and_fault() {
        let r = RadialProfile::from_fn(2.0, 201, 0.0, |rho| (rho - 1.0).max(0.0).powi(2)).unwrap();
        let u = legendre_transform(
            &State::Radial(r),
            &PolarGrid::uniform(1, 41, 1.0).unwrap(),
            &p21(),
        )
        .unwrap();
        let rhs = dual_rhs(&u, &p21(), 0.2, 0.8);
        let u_t: Vec<f64> = rhs.iter().map(|f| f.unwrap_or(-1.0)).collect();
        let res = residual_dual(&u, &u_t, &p21(), 0.2, 0.8).unwrap();
        assert_eq!(res.sup, 0.0);
        assert!(res.evaluated > 0);
        let zero = vec![0.0; u.values.len()];
        assert!(matches!(
            residual_dual(&u, &zero, &p21(), 0.2, 0.8),
            Err(FlowError::NonShrinking { .. })
        ));
    }

    #[test]
    fn polar_determinant_of_quadratic() {
        // u = |x|^2 / 2 + x_1^2 / 2 has det D^2 u = 2 everywhere
        let grid = PolarGrid::uniform(256, 41, 1.0).unwrap();
        let mut values = Vec::new();
        for k in 0..grid.n_theta() {
            for j in 0..grid.n_r() {
                let x = grid.point(k, j);
                values.push(0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.5 * x[0] * x[0]);
            }
        }
        let u = LegendreField {
            grid,
            values,
            center_mass: 0.0,
            time: 0.0,
            radial: false,
            n: 2,
        };
        for &(k, j) in &[(0, 20), (37, 10), (100, 30), (201, 5)] {
            assert_abs_diff_eq!(u.hessian_det(k, j).unwrap(), 2.0, epsilon = 1e-3);
        }
    }
}
