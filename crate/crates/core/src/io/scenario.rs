//! Initial data: flat disks with a convex collar, spherical caps and files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::{check_initial_conditions, InitialCheckOptions};
use crate::error::{FlowError, Result};
use crate::params::FlowParams;
use crate::solver::{sphere_cap_profile, GraphGrid, RadialProfile, State};

use super::snapshot::resume_snapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// `c ((rho - R)_+)^gamma`; `gamma` defaults to `1 + 1/sigma_p`.
    RadialFlatDisk {
        flat_radius: f64,
        amplitude: f64,
        #[serde(default)]
        exponent: Option<f64>,
    },
    /// Lower cap of the sphere of the given radius, shifted so the apex is 0.
    CapSphere { radius: f64 },
    /// Flat set `{rho < R (1 + eps cos(k theta))}` with the collar
    /// `c R^gamma ((phi - 1)_+)^gamma`, `phi` its gauge function.
    PerturbedFlatDisk {
        flat_radius: f64,
        amplitude: f64,
        perturbation: f64,
        mode: u32,
        #[serde(default)]
        exponent: Option<f64>,
    },
    /// A stored snapshot.
    CustomFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub geometry: Geometry,
    /// Number of grid intervals (radial nodes or nodes per side minus one).
    pub grid: usize,
    /// Radial extent or half-width of the square; a per-kind default when absent.
    #[serde(default)]
    pub extent: Option<f64>,
    pub n: usize,
    pub p: f64,
}

impl ScenarioSpec {
    /// The reference scenario: `((rho - 1)_+)^2` for `n = 2, p = 1`.
    pub fn radial_flat_disk(grid: usize) -> Self {
        Self {
            name: "radial_flat_disk".into(),
            geometry: Geometry::RadialFlatDisk {
                flat_radius: 1.0,
                amplitude: 1.0,
                exponent: None,
            },
            grid,
            extent: None,
            n: 2,
            p: 1.0,
        }
    }

    pub fn cap_sphere(grid: usize) -> Self {
        Self {
            name: "cap_sphere".into(),
            geometry: Geometry::CapSphere { radius: 1.0 },
            grid,
            extent: None,
            n: 2,
            p: 1.0,
        }
    }

    pub fn perturbed_flat_disk(grid: usize) -> Self {
        Self {
            name: "perturbed_flat_disk".into(),
            geometry: Geometry::PerturbedFlatDisk {
                flat_radius: 1.0,
                amplitude: 1.0,
                perturbation: 0.05,
                mode: 3,
                exponent: None,
            },
            grid,
            extent: None,
            n: 2,
            p: 1.0,
        }
    }

    /// Whether the initial data carries a flat side.
    pub fn has_flat_side(&self) -> bool {
        !matches!(self.geometry, Geometry::CapSphere { .. })
    }

    pub fn params(&self) -> Result<FlowParams> {
        FlowParams::derive(self.n, self.p, self.has_flat_side())
    }
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(FlowError::invalid(format!("{name} = {x} must be positive")))
    }
}

fn nodes(grid: usize) -> Result<usize> {
    if grid < 8 {
        return Err(FlowError::invalid(format!(
            "grid = {grid} needs at least 8 intervals"
        )));
    }
    Ok(grid + 1)
}

/// Initial state and parameters. Flat-side data must pass the (I1) and (I2)
/// prechecks; the error names the failing condition.
pub fn scenario_build(spec: &ScenarioSpec) -> Result<(State, FlowParams)> {
    let params = spec.params()?;
    let gamma_default = |g: Option<f64>| -> Result<f64> {
        let gamma = g.unwrap_or(1.0 + 1.0 / params.sigma_p);
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(FlowError::invalid(format!(
                "collar exponent {gamma} must be >= 1"
            )));
        }
        Ok(gamma)
    };
    let (state, scale) = match &spec.geometry {
        &Geometry::RadialFlatDisk {
            flat_radius,
            amplitude,
            exponent,
        } => {
            let r = positive("flat_radius", flat_radius)?;
            let c = positive("amplitude", amplitude)?;
            let gamma = gamma_default(exponent)?;
            let extent = positive("extent", spec.extent.unwrap_or(2.0 * r))?;
            if extent <= r {
                return Err(FlowError::invalid(format!(
                    "extent {extent} must exceed the flat radius {r}"
                )));
            }
            let prof = RadialProfile::from_fn(extent, nodes(spec.grid)?, 0.0, |rho| {
                c * (rho - r).max(0.0).powf(gamma)
            })?;
            (State::Radial(prof), r)
        }
        &Geometry::CapSphere { radius } => {
            let r = positive("radius", radius)?;
            let extent = positive("extent", spec.extent.unwrap_or(0.8 * r))?;
            return Ok((
                State::Radial(sphere_cap_profile(r, r, extent, nodes(spec.grid)?, 0.0)?),
                params,
            ));
        }
        &Geometry::PerturbedFlatDisk {
            flat_radius,
            amplitude,
            perturbation,
            mode,
            exponent,
        } => {
            let r = positive("flat_radius", flat_radius)?;
            let c = positive("amplitude", amplitude)?;
            let gamma = gamma_default(exponent)?;
            if spec.n != 2 {
                return Err(FlowError::Unsupported(format!(
                    "perturbed_flat_disk is a 2-D grid scenario, n = {}",
                    spec.n
                )));
            }
            let k = mode as f64;
            // the curve r = R (1 + eps cos k theta) is convex iff eps (k^2 - 1) < 1
            if !(perturbation.abs() < 1.0 && perturbation.abs() * (k * k - 1.0).max(0.0) < 1.0) {
                return Err(FlowError::domain(format!(
                    "I1 fails: flat set with perturbation {perturbation}, mode {mode} is not strictly convex"
                )));
            }
            let half = positive(
                "extent",
                spec.extent.unwrap_or(2.0 * r * (1.0 + perturbation.abs())),
            )?;
            let grid = GraphGrid::from_fn(half, nodes(spec.grid)?, 0.0, |y| {
                let rho = y[0].hypot(y[1]);
                let edge = r * (1.0 + perturbation * (k * y[1].atan2(y[0])).cos());
                c * r.powf(gamma) * (rho / edge - 1.0).max(0.0).powf(gamma)
            })?;
            (State::Graph(grid), r * (1.0 - perturbation.abs()))
        }
        Geometry::CustomFile { path } => {
            let (state, _) = resume_snapshot(path)?;
            let r =
                crate::solver::extract_interface(&state, spec.n, crate::solver::DEFAULT_EPS_INT)?
                    .inner_radius;
            (state, if r > 0.0 { r } else { 1.0 })
        }
    };
    precheck(&state, &params, scale)?;
    Ok((state, params))
}

fn precheck(state: &State, params: &FlowParams, radius: f64) -> Result<()> {
    let opts = InitialCheckOptions {
        curvature: [0.25 / radius, 4.0 / radius],
        ..Default::default()
    };
    let report = check_initial_conditions(state, params, &opts)?;
    for name in ["I1 level-set curvature", "I2 |Dg| on the interface"] {
        if let Some(c) = report.check(name).filter(|c| !c.passed) {
            return Err(FlowError::domain(format!(
                "{name} fails: measured {:?}, bounds {:?}",
                c.measured, c.thresholds
            )));
        }
    }
    Ok(())
}
