//! The parabolic half-space metric `mu`.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

/// A point `(x', x_n, t)` of the closed half-space times the time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuPoint {
    pub x_prime: Vec<f64>,
    pub x_n: f64,
    pub t: f64,
}

impl MuPoint {
    pub fn new(x_prime: Vec<f64>, x_n: f64, t: f64) -> Result<Self> {
        let p = Self { x_prime, x_n, t };
        p.validate()?;
        Ok(p)
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        self.x_prime.len() + 1
    }

    /// Spatial coordinate `k` in `0..n`, with `k = n - 1` the normal one.
    pub fn coord(&self, k: usize) -> f64 {
        if k < self.x_prime.len() {
            self.x_prime[k]
        } else {
            self.x_n
        }
    }

    /// Copy with spatial coordinate `k` shifted by `by`.
    pub fn shifted(&self, k: usize, by: f64) -> MuPoint {
        let mut p = self.clone();
        if k < p.x_prime.len() {
            p.x_prime[k] += by;
        } else {
            p.x_n += by;
        }
        p
    }

    fn validate(&self) -> Result<()> {
        if !(self.x_n >= 0.0) {
            return Err(FlowError::domain(format!(
                "x_n = {} lies outside the half-space",
                self.x_n
            )));
        }
        if !self.t.is_finite() || self.x_prime.iter().any(|c| !c.is_finite()) {
            return Err(FlowError::invalid("non-finite point coordinate"));
        }
        Ok(())
    }
}

/// `|x' - y'| + |sqrt(x_n) - sqrt(y_n)| + sqrt(|t - s|)`.
pub fn mu_distance(a: &MuPoint, b: &MuPoint) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if a.x_prime.len() != b.x_prime.len() {
        return Err(FlowError::invalid(format!(
            "points of dimension {} and {} cannot be compared",
            a.dim(),
            b.dim()
        )));
    }
    Ok(mu_unchecked(a, b))
}

pub(crate) fn mu_unchecked(a: &MuPoint, b: &MuPoint) -> f64 {
    let tangential = a
        .x_prime
        .iter()
        .zip(&b.x_prime)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    tangential + (a.x_n.sqrt() - b.x_n.sqrt()).abs() + (a.t - b.t).abs().sqrt()
}
