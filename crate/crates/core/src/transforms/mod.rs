//! The derived representations of a height field: pressure, Legendre dual,
//! rescaled radial profile and hodograph patch, with their equation residuals.

mod hodograph;
mod legendre;
mod pressure;
mod sampler;
mod zeta;

pub use hodograph::{
    assemble_htilde, frame_from_normal, hodograph_resolve, hodograph_rhs, hodograph_solve,
    htilde_from_jet, invert_small, linearized_coefficients, linearized_from_jet,
    residual_hodograph, HodographJet, HodographOptions, HodographPatch, LinearizedCoefficients,
    LinearizedPoint,
};
pub use legendre::{
    conjugate_points, conjugate_points_naive, dual_rhs, legendre_brute_force, legendre_transform,
    legendre_transform_with, residual_dual, LegendreField, PolarGrid,
};
pub use pressure::{
    from_pressure, height_of, pressure_of, pressure_rhs, pressure_speed, pressure_speed_radial,
    residual_pressure, to_pressure, PressureField,
};
pub use sampler::{FieldSampler, GridSampler, RadialSampler};
pub use zeta::{fbar, rescaled_zeta, residual_zeta, zeta_rhs, RescaledProfile};

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::fold_max;

/// Pointwise residual on the evaluated nodes of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `(node index, residual)` for every evaluated node.
    pub values: Vec<(usize, f64)>,
    pub sup: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

impl Residual {
    pub(crate) fn collect(entries: impl IntoIterator<Item = Option<(usize, f64)>>) -> Self {
        let mut values = Vec::new();
        let mut skipped = 0;
        for e in entries {
            match e {
                Some(v) => values.push(v),
                None => skipped += 1,
            }
        }
        let sup = fold_max(values.iter().map(|(_, r)| r.abs())).unwrap_or(0.0);
        Self {
            evaluated: values.len(),
            values,
            sup,
            skipped,
        }
    }

    /// Sup norm over the nodes accepted by `keep`.
    pub fn sup_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        fold_max(
            self.values
                .iter()
                .filter(|(k, _)| keep(*k))
                .map(|(_, r)| r.abs()),
        )
        .unwrap_or(0.0)
    }
}

/// Centered time derivative from snapshots at `t - dt` and `t + dt`.
pub fn centered_time_derivative(
    before: &[f64],
    after: &[f64],
    t_before: f64,
    t_after: f64,
) -> Result<Vec<f64>> {
    if before.len() != after.len() {
        return Err(FlowError::invalid(
            "time-derivative snapshots have different sizes",
        ));
    }
    let dt = t_after - t_before;
    if !(dt > 0.0) {
        return Err(FlowError::invalid(format!(
            "snapshot times {t_before} and {t_after} are not increasing"
        )));
    }
    Ok(before
        .iter()
        .zip(after)
        .map(|(a, b)| (b - a) / dt)
        .collect())
}

/// Any derived field, tagged for the snapshot schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "frame", rename_all = "snake_case")]
pub enum TransformFrame {
    Pressure(PressureField),
    Legendre(LegendreField),
    Hodograph(HodographPatch),
    Zeta(RescaledProfile),
}

impl TransformFrame {
    pub fn time(&self) -> f64 {
        match self {
            TransformFrame::Pressure(f) => f.time(),
            TransformFrame::Legendre(f) => f.time,
            TransformFrame::Hodograph(f) => f.time,
            TransformFrame::Zeta(f) => f.time,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformFrame::Pressure(_) => "pressure",
            TransformFrame::Legendre(_) => "legendre",
            TransformFrame::Hodograph(_) => "hodograph",
            TransformFrame::Zeta(_) => "zeta",
        }
    }
}
