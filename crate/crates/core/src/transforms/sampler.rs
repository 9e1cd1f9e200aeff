//! Continuous evaluation of gridded fields at arbitrary points.

use crate::error::{FlowError, Result};
use crate::solver::{GraphGrid, RadialProfile};

pub trait FieldSampler: Sync {
    /// Spatial dimension of the query points.
    fn dim(&self) -> usize;
    /// Field value at `y`; `None` outside the sampled domain.
    fn value(&self, y: &[f64]) -> Option<f64>;
    fn time(&self) -> f64;
}

impl<T: FieldSampler + ?Sized> FieldSampler for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, y: &[f64]) -> Option<f64> {
        (**self).value(y)
    }

    fn time(&self) -> f64 {
        (**self).time()
    }
}

/// Monotone cubic (PCHIP) interpolation of a radial profile, evaluated at `|y|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSampler {
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    n: usize,
    time: f64,
}

impl RadialSampler {
    pub fn new(profile: &RadialProfile, n: usize) -> Self {
        Self::build(profile.step, profile.values.clone(), n, profile.time)
    }

    /// Like [`RadialSampler::new`], but every node before the first one with
    /// value `>= threshold` is replaced by the quadratic continuation of the
    /// three nodes starting there. The field then crosses zero transversally
    /// at the interface instead of running into the smeared front.
    pub fn extended(profile: &RadialProfile, n: usize, threshold: f64) -> Result<Self> {
        let v = &profile.values;
        let base = v.iter().position(|&g| g >= threshold).ok_or_else(|| {
            FlowError::domain(format!(
                "profile never reaches the extension threshold {threshold}"
            ))
        })?;
        if base == 0 || base + 2 >= v.len() {
            return Err(FlowError::domain(format!(
                "cannot extend a profile from node {base}"
            )));
        }
        let (f0, f1, f2) = (v[base], v[base + 1], v[base + 2]);
        let quad = |i: f64| {
            let s = i - base as f64;
            f0 + s * (f1 - f0) + 0.5 * s * (s - 1.0) * (f2 - 2.0 * f1 + f0)
        };
        let mut values = v.clone();
        for i in (0..base).rev() {
            let next = values[i + 1];
            let guess = quad(i as f64);
            // keep the continuation strictly increasing outward
            values[i] = if guess < next {
                guess
            } else {
                next - (values[i + 2] - next).abs().max(f64::MIN_POSITIVE)
            };
        }
        Ok(Self::build(profile.step, values, n, profile.time))
    }

    fn build(step: f64, values: Vec<f64>, n: usize, time: f64) -> Self {
        let m = values.len();
        let mut slopes = vec![0.0; m];
        for i in 1..m - 1 {
            let (a, b) = (
                (values[i] - values[i - 1]) / step,
                (values[i + 1] - values[i]) / step,
            );
            slopes[i] = if a * b > 0.0 {
                2.0 / (1.0 / a + 1.0 / b)
            } else {
                0.0
            };
        }
        // even extension at the origin
        slopes[0] = 0.0;
        slopes[m - 1] = (values[m - 1] - values[m - 2]) / step;
        Self {
            step,
            values,
            slopes,
            n,
            time,
        }
    }

    pub fn rho_max(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_radius(&self, rho: f64) -> Option<f64> {
        if !(rho >= 0.0 && rho <= self.rho_max()) {
            return None;
        }
        let m = self.values.len();
        let i = ((rho / self.step).floor() as usize).min(m - 2);
        let t = rho / self.step - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(
            h00 * self.values[i]
                + h10 * self.step * self.slopes[i]
                + h01 * self.values[i + 1]
                + h11 * self.step * self.slopes[i + 1],
        )
    }

    /// Radius where the sampled field first reaches `level`, by bisection on
    /// the interpolant; `None` if it never does.
    pub fn level_radius(&self, level: f64) -> Option<f64> {
        let k = self.values.iter().position(|&g| g > level)?;
        let (mut lo, mut hi) = (
            if k == 0 {
                0.0
            } else {
                (k - 1) as f64 * self.step
            },
            k as f64 * self.step,
        );
        if k == 0 || self.at_radius(lo)? > level {
            return Some(lo);
        }
        while hi - lo > 1e-14 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.at_radius(mid)? > level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

impl FieldSampler for RadialSampler {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, y: &[f64]) -> Option<f64> {
        self.at_radius(y.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    fn time(&self) -> f64 {
        self.time
    }
}

/// Bicubic Catmull-Rom interpolation on a 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSampler {
    grid: GraphGrid,
}

impl GridSampler {
    pub fn new(grid: &GraphGrid) -> Self {
        Self { grid: grid.clone() }
    }
}

#[inline]
fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    0.5 * (2.0 * p[1]
        + t * (p[2] - p[0])
        + t * t * (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3])
        + t * t * t * (3.0 * p[1] - p[0] - 3.0 * p[2] + p[3]))
}

impl FieldSampler for GridSampler {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, y: &[f64]) -> Option<f64> {
        let g = &self.grid;
        let fx = (y[0] - g.origin[0]) / g.step;
        let fy = (y[1] - g.origin[1]) / g.step;
        // one cell of margin for the 4x4 stencil
        if !(fx >= 1.0 && fy >= 1.0 && fx <= (g.nx - 2) as f64 && fy <= (g.ny - 2) as f64) {
            return None;
        }
        let i = (fx.floor() as usize).min(g.nx - 3);
        let j = (fy.floor() as usize).min(g.ny - 3);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let mut rows = [0.0; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            let jj = j + r - 1;
            *row = catmull_rom(
                [
                    g.at(i - 1, jj),
                    g.at(i, jj),
                    g.at(i + 1, jj),
                    g.at(i + 2, jj),
                ],
                tx,
            );
        }
        Some(catmull_rom(rows, ty))
    }

    fn time(&self) -> f64 {
        self.grid.time
    }
}
