//! Log-log least-squares power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Clamped to `[0, 1]`.
    pub r_squared: f64,
    pub window: [f64; 2],
    pub used: usize,
    /// Samples in the window with `d <= 0` or `value <= 0`.
    pub excluded_nonpositive: usize,
    pub outside_window: usize,
}

impl ExponentFit {
    /// `|exponent - target| <= rel_tol * |target|`.
    pub fn within(&self, target: f64, rel_tol: f64) -> bool {
        (self.exponent - target).abs() <= rel_tol * target.abs()
    }
}

/// Fits `value = prefactor * d^exponent` over samples with `d` in `[window.0, window.1]`.
pub fn fit_power_law(samples: &[(f64, f64)], window: (f64, f64)) -> Result<ExponentFit> {
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(FlowError::invalid(format!("empty fit window [{lo}, {hi}]")));
    }
    let mut pts = Vec::new();
    let (mut excluded, mut outside) = (0, 0);
    for &(d, v) in samples {
        if !(d >= lo && d <= hi) {
            outside += 1;
        } else if d > 0.0 && v > 0.0 && v.is_finite() {
            pts.push((d.ln(), v.ln()));
        } else {
            excluded += 1;
        }
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(FlowError::InsufficientSamples {
            usable: pts.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let m = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / m,
        pts.iter().map(|p| p.1).sum::<f64>() / m,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(FlowError::invalid("all fit samples share one abscissa"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(ExponentFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
        window: [lo, hi],
        used: pts.len(),
        excluded_nonpositive: excluded,
        outside_window: outside,
    })
}

/// Least-squares line `y = slope * x + intercept`, with `r^2`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(FlowError::InsufficientSamples {
            usable: xs.len().min(ys.len()),
            required: 2,
        });
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(FlowError::invalid("all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        (slope * sxy / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok((slope, my - slope * mx, r2))
}
