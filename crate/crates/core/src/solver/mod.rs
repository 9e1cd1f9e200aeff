//! Time evolution of the height function on radial and 2-D Cartesian grids.

mod interface;
mod rhs;
mod run;
mod sphere;
mod step;

pub use interface::{extract_interface, unit_ball_volume, InterfaceState};
pub use rhs::{graph_speed, radial_speed, rhs, rhs_graph, rhs_radial, rhs_with, EPS_FLAT};
pub use run::{estimate_tstar, run_flow, DtPolicy, RunFault, RunOptions, Trajectory};
pub use sphere::{sphere_cap_profile, sphere_exact_radius, sphere_extinction_time};
pub use step::{
    max_parabolic_coefficient, stable_dt, step_explicit, step_explicit_with, DEFAULT_CFL,
};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

/// Default level for interface extraction.
pub const DEFAULT_EPS_INT: f64 = 1e-6;

/// Rotationally symmetric height `V(rho)` on the uniform grid `rho_i = i * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub step: f64,
    pub values: Vec<f64>,
    pub time: f64,
}

impl RadialProfile {
    pub fn new(step: f64, values: Vec<f64>, time: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(FlowError::invalid(format!(
                "radial step {step} must be positive"
            )));
        }
        if values.len() < 4 {
            return Err(FlowError::invalid("radial profile needs at least 4 nodes"));
        }
        Ok(Self { step, values, time })
    }

    /// Samples `f` on `len` nodes covering `[0, rho_max]`.
    pub fn from_fn(rho_max: f64, len: usize, time: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if len < 4 {
            return Err(FlowError::invalid("radial profile needs at least 4 nodes"));
        }
        let step = rho_max / (len - 1) as f64;
        let values = (0..len).map(|i| f(i as f64 * step)).collect();
        Self::new(step, values, time)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rho(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn rho_max(&self) -> f64 {
        self.rho(self.len() - 1)
    }

    /// `true` when the profile is nondecreasing in `rho` up to `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - tol)
    }
}

/// Height `v(y)` on a uniform 2-D grid; row-major with `values[j * nx + i]`
/// at `y = origin + (i, j) * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphGrid {
    pub origin: [f64; 2],
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GraphGrid {
    pub fn new(
        origin: [f64; 2],
        step: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
        time: f64,
    ) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(FlowError::invalid(format!(
                "grid step {step} must be positive"
            )));
        }
        if nx < 5 || ny < 5 {
            return Err(FlowError::invalid("graph grid needs at least 5x5 nodes"));
        }
        if values.len() != nx * ny {
            return Err(FlowError::invalid(format!(
                "value array has {} entries, expected {}",
                values.len(),
                nx * ny
            )));
        }
        Ok(Self {
            origin,
            step,
            nx,
            ny,
            values,
            time,
        })
    }

    /// Samples `f` on the square `[-half_width, half_width]^2` with `nodes` per side.
    pub fn from_fn(
        half_width: f64,
        nodes: usize,
        time: f64,
        f: impl Fn([f64; 2]) -> f64,
    ) -> Result<Self> {
        if nodes < 5 {
            return Err(FlowError::invalid("graph grid needs at least 5x5 nodes"));
        }
        let step = 2.0 * half_width / (nodes - 1) as f64;
        let origin = [-half_width, -half_width];
        let mut values = Vec::with_capacity(nodes * nodes);
        for j in 0..nodes {
            for i in 0..nodes {
                values.push(f([
                    origin[0] + i as f64 * step,
                    origin[1] + j as f64 * step,
                ]));
            }
        }
        Self::new(origin, step, nodes, nodes, values, time)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.step,
            self.origin[1] + j as f64 * self.step,
        ]
    }

    /// Bilinear interpolation; `None` outside the grid box.
    pub fn interpolate(&self, y: [f64; 2]) -> Option<f64> {
        let fx = (y[0] - self.origin[0]) / self.step;
        let fy = (y[1] - self.origin[1]) / self.step;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (self.nx - 1) as f64 && fy <= (self.ny - 1) as f64) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (a, b) = (fx - i as f64, fy - j as f64);
        Some(
            (1.0 - a) * (1.0 - b) * self.at(i, j)
                + a * (1.0 - b) * self.at(i + 1, j)
                + (1.0 - a) * b * self.at(i, j + 1)
                + a * b * self.at(i + 1, j + 1),
        )
    }

    /// Lowers interior nodes until every second difference along the axes and
    /// diagonals is nonnegative (to `1e-12`): the largest field below `self`
    /// with that property. Returns the number of updates.
    pub fn restore_convexity(&mut self) -> usize {
        let (nx, ny) = (self.nx, self.ny);
        if nx < 3 || ny < 3 {
            return 0;
        }
        let interior = |k: usize| {
            let (i, j) = (k % nx, k / nx);
            i > 0 && j > 0 && i + 1 < nx && j + 1 < ny
        };
        let v = &mut self.values;
        let mut queued: Vec<bool> = (0..nx * ny).map(interior).collect();
        let mut queue: VecDeque<usize> = (0..nx * ny).filter(|&k| queued[k]).collect();
        let mut updates = 0;
        while let Some(k) = queue.pop_front() {
            queued[k] = false;
            let cap = [1, nx, nx + 1, nx - 1]
                .iter()
                .map(|&d| 0.5 * (v[k - d] + v[k + d]))
                .fold(f64::INFINITY, f64::min);
            if v[k] - cap <= 1e-12 {
                continue;
            }
            v[k] = cap;
            updates += 1;
            for d in [1, nx, nx + 1, nx - 1] {
                for m in [k - d, k + d] {
                    if interior(m) && !queued[m] {
                        queued[m] = true;
                        queue.push_back(m);
                    }
                }
            }
        }
        updates
    }

    /// Most negative second difference along the axes and both diagonals
    /// (zero for a discretely convex field).
    pub fn convexity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 1..self.ny - 1 {
            for i in 1..self.nx - 1 {
                let c = 2.0 * self.at(i, j);
                let d = [
                    self.at(i + 1, j) + self.at(i - 1, j) - c,
                    self.at(i, j + 1) + self.at(i, j - 1) - c,
                    self.at(i + 1, j + 1) + self.at(i - 1, j - 1) - c,
                    self.at(i + 1, j - 1) + self.at(i - 1, j + 1) - c,
                ];
                for v in d {
                    worst = worst.min(v);
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum State {
    Radial(RadialProfile),
    Graph(GraphGrid),
}

impl State {
    pub fn time(&self) -> f64 {
        match self {
            State::Radial(r) => r.time,
            State::Graph(g) => g.time,
        }
    }

    pub fn set_time(&mut self, t: f64) {
        match self {
            State::Radial(r) => r.time = t,
            State::Graph(g) => g.time = t,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            State::Radial(r) => &r.values,
            State::Graph(g) => &g.values,
        }
    }

    pub fn values_mut(&mut self) -> &mut Vec<f64> {
        match self {
            State::Radial(r) => &mut r.values,
            State::Graph(g) => &mut g.values,
        }
    }

    pub fn step(&self) -> f64 {
        match self {
            State::Radial(r) => r.step,
            State::Graph(g) => g.step,
        }
    }

    /// Same grid, new values and time.
    pub fn with_values(&self, values: Vec<f64>, time: f64) -> State {
        let mut out = self.clone();
        *out.values_mut() = values;
        out.set_time(time);
        out
    }

    /// Height at the origin (bilinear on 2-D grids).
    pub fn apex_height(&self) -> f64 {
        match self {
            State::Radial(r) => r.values[0],
            State::Graph(g) => g.interpolate([0.0, 0.0]).unwrap_or(f64::NAN),
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn as_radial(&self) -> Option<&RadialProfile> {
        match self {
            State::Radial(r) => Some(r),
            State::Graph(_) => None,
        }
    }

    pub fn as_graph(&self) -> Option<&GraphGrid> {
        match self {
            State::Graph(g) => Some(g),
            State::Radial(_) => None,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, &v) in self.values().iter().enumerate() {
            if !v.is_finite() {
                return Err(FlowError::NonFinite {
                    location: format!("node {i}"),
                    value: v,
                });
            }
        }
        Ok(())
    }
}
