//! The measurement suite run on a recorded trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::Exec;
use crate::params::FlowParams;
use crate::solver::{extract_interface, State, DEFAULT_EPS_INT};
use crate::transforms::{
    assemble_htilde, centered_time_derivative, hodograph_resolve, hodograph_solve,
    legendre_transform, linearized_coefficients, rescaled_zeta, residual_hodograph,
    residual_pressure, residual_zeta, to_pressure, FieldSampler, GridSampler, HodographOptions,
    PolarGrid, PressureField, RadialSampler,
};

use super::chart::{ChartSlice, InterfaceChart};
use super::conditions::{
    check_initial_conditions, check_matrix_pinch, check_transversality, polyline_distance,
    InitialCheckOptions, TransversalityOptions,
};
use super::fit::{fit_line, fit_power_law, ExponentFit};
use super::holder::{holder_norm_c2alpha_mu, HolderOptions, HolderReport, MuCylinder};
use super::intermediate::{intermediate_estimate_sup, IntermediateOptions};
use super::report::{
    Check, ConditionReport, HolderEntry, NamedFit, ResidualSummary, VerificationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    InitialConditions,
    Exponent,
    Dual,
    Residuals,
    Pinch,
    Kinematics,
    Holder,
    Transversality,
    Intermediate,
}

impl Analysis {
    pub const ALL: [Analysis; 9] = [
        Analysis::InitialConditions,
        Analysis::Exponent,
        Analysis::Dual,
        Analysis::Residuals,
        Analysis::Pinch,
        Analysis::Kinematics,
        Analysis::Holder,
        Analysis::Transversality,
        Analysis::Intermediate,
    ];
}

/// Measurement settings. The defaults are the ones the reference run is
/// checked with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOptions {
    /// Half-spacing of the centered time differences.
    pub delta: f64,
    /// The zero level of radial pressure profiles is continued from the first
    /// node with `g >= extension_cells * step`.
    pub extension_cells: f64,
    pub fit_window: [f64; 2],
    pub fit_tolerance: f64,
    pub min_r_squared: f64,
    pub dual_radii: usize,
    pub dual_r_max: f64,
    pub dual_window: [f64; 2],
    pub dual_tolerance: f64,
    /// Upper end of the band `{0 < g < collar}`.
    pub collar: f64,
    pub residual_eta: f64,
    pub zeta_s: [f64; 2],
    pub zeta_nodes: usize,
    pub zeta_window: [f64; 2],
    pub pinch_eta: f64,
    pub pinch_bounds: [f64; 2],
    pub pinch_slices: usize,
    pub drift_floor: f64,
    pub boundary_tolerance: f64,
    pub kinematics_slices: usize,
    pub recession_r_squared: f64,
    pub holder_alpha: f64,
    pub holder_pairs: usize,
    pub holder_half_width: f64,
    pub holder_depth: f64,
    pub holder_spacing: f64,
    pub intermediate_pairs: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            delta: 2e-3,
            extension_cells: 2.0,
            fit_window: [0.01, 0.1],
            fit_tolerance: 0.10,
            min_r_squared: 0.99,
            dual_radii: 401,
            dual_r_max: 1.0,
            dual_window: [0.01, 0.1],
            dual_tolerance: 0.15,
            collar: 0.2,
            residual_eta: 0.1,
            zeta_s: [0.2, 1.0],
            zeta_nodes: 41,
            zeta_window: [0.3, 0.9],
            pinch_eta: 0.2,
            pinch_bounds: [0.1, 10.0],
            pinch_slices: 5,
            drift_floor: 0.1,
            boundary_tolerance: 0.05,
            kinematics_slices: 5,
            recession_r_squared: 0.9,
            holder_alpha: 0.25,
            holder_pairs: 100_000,
            holder_half_width: 0.05,
            holder_depth: 0.1,
            holder_spacing: 0.01,
            intermediate_pairs: 100_000,
            seed: 0,
        }
    }
}

impl SuiteOptions {
    /// Snapshot times the analyses need when measuring at `t`.
    pub fn required_times(&self, analyses: &[Analysis], t: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for a in analyses {
            match a {
                Analysis::InitialConditions => out.push(0.0),
                Analysis::Exponent => out.push(t),
                Analysis::Dual | Analysis::Residuals | Analysis::Transversality => {
                    out.extend([t - self.delta, t, t + self.delta])
                }
                Analysis::Pinch => out.extend(even_times(t, self.pinch_slices).skip(1)),
                Analysis::Kinematics => out.extend(even_times(t, self.kinematics_slices)),
                Analysis::Holder => {
                    out.extend((0..3).rev().map(|k| t - k as f64 * self.holder_spacing))
                }
                Analysis::Intermediate => out.extend([0.5 * t, t]),
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

fn even_times(t: f64, slices: usize) -> impl Iterator<Item = f64> {
    let k = slices.max(1);
    (0..=k).map(move |i| t * i as f64 / k as f64)
}

fn snapshot_at(states: &[State], t: f64) -> Result<&State> {
    states
        .iter()
        .find(|s| (s.time() - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or_else(|| FlowError::invalid(format!("trajectory has no snapshot at t = {t}")))
}

/// `(dist(., Gamma_t), v)` for every node outside the flat set.
pub fn interface_distance_samples(state: &State, params: &FlowParams) -> Result<Vec<(f64, f64)>> {
    let iface = extract_interface(state, params.n, DEFAULT_EPS_INT)?;
    Ok(match state {
        State::Radial(r) => r
            .values
            .iter()
            .enumerate()
            .filter(|&(i, _)| r.rho(i) > iface.outer_radius)
            .map(|(i, &v)| (r.rho(i) - iface.outer_radius, v))
            .collect(),
        State::Graph(g) => {
            if iface.contour.len() < 2 {
                return Err(FlowError::domain("height field has no interface contour"));
            }
            (0..g.ny)
                .flat_map(|j| (0..g.nx).map(move |i| (i, j)))
                .filter(|&(i, j)| g.at(i, j) > DEFAULT_EPS_INT)
                .map(|(i, j)| (polyline_distance(&iface.contour, g.point(i, j)), g.at(i, j)))
                .collect()
        }
    })
}

/// Power-law fit of `v` against the distance to the interface.
pub fn exponent_fit(state: &State, params: &FlowParams, window: [f64; 2]) -> Result<ExponentFit> {
    fit_power_law(
        &interface_distance_samples(state, params)?,
        (window[0], window[1]),
    )
}

/// Fits of `-u_t` and `u_xixi` against the dual radius, from snapshots at
/// `t - delta, t, t + delta`.
pub fn dual_fits(
    states: [&State; 3],
    params: &FlowParams,
    opts: &SuiteOptions,
) -> Result<[ExponentFit; 2]> {
    let grid = PolarGrid::uniform(1, opts.dual_radii, opts.dual_r_max)?;
    let [a, b, c] = states.map(|s| legendre_transform(s, &grid, params));
    let (a, b, c) = (a?, b?, c?);
    let u_t = centered_time_derivative(&a.values, &c.values, a.time, c.time)?;
    let last = grid.n_r() - 1;
    let speed: Vec<(f64, f64)> = (1..last).map(|j| (grid.radii[j], -u_t[j])).collect();
    let tangential: Vec<(f64, f64)> = (1..last)
        .filter_map(|j| b.polar_derivatives(0, j).map(|d| (grid.radii[j], d.2)))
        .collect();
    let w = (opts.dual_window[0], opts.dual_window[1]);
    Ok([fit_power_law(&speed, w)?, fit_power_law(&tangential, w)?])
}

/// A pressure sampler with a chart anchor on the interface and its outer normal.
pub fn pressure_anchor(
    g: &PressureField,
    state: &State,
    params: &FlowParams,
    extension_cells: f64,
) -> Result<(Box<dyn FieldSampler>, Vec<f64>, Vec<f64>)> {
    let n = params.n;
    match &g.field {
        State::Radial(r) => {
            let s = RadialSampler::extended(r, n, extension_cells * r.step)?;
            let rho = s
                .level_radius(0.0)
                .ok_or_else(|| FlowError::domain("pressure has no zero level"))?;
            let mut anchor = vec![0.0; n];
            anchor[n - 1] = rho;
            let mut normal = vec![0.0; n];
            normal[n - 1] = 1.0;
            Ok((Box::new(s), anchor, normal))
        }
        State::Graph(grid) => {
            let pts = extract_interface(state, n, DEFAULT_EPS_INT)?.contour;
            let m = pts.len();
            if m < 3 {
                return Err(FlowError::domain("height field has no interface contour"));
            }
            // the contour point furthest along +x, normal pointing away from the centroid
            let k = (0..m)
                .max_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]))
                .unwrap_or(0);
            let (prev, next) = (pts[(k + m - 1) % m], pts[(k + 1) % m]);
            let (tx, ty) = (next[0] - prev[0], next[1] - prev[1]);
            let len = tx.hypot(ty);
            if !(len > 0.0) {
                return Err(FlowError::domain("degenerate interface contour"));
            }
            let c = pts.iter().fold([0.0, 0.0], |acc, p| {
                [acc[0] + p[0] / m as f64, acc[1] + p[1] / m as f64]
            });
            let mut nu = [ty / len, -tx / len];
            if (pts[k][0] - c[0]) * nu[0] + (pts[k][1] - c[1]) * nu[1] < 0.0 {
                nu = [-nu[0], -nu[1]];
            }
            Ok((
                Box::new(GridSampler::new(grid)),
                pts[k].to_vec(),
                nu.to_vec(),
            ))
        }
    }
}

/// Sup norms of the pressure, hodograph and zeta residuals on the collar at
/// the middle snapshot.
pub fn collar_residuals(
    states: [&State; 3],
    params: &FlowParams,
    opts: &SuiteOptions,
) -> Result<Vec<ResidualSummary>> {
    let [a, b, c] = states;
    let (ta, tc) = (a.time(), c.time());
    let h = b.step();
    let [ga, gb, gc] = [a, b, c].map(|s| to_pressure(s, params));
    let (ga, gb, gc) = (ga?, gb?, gc?);

    let g_t = centered_time_derivative(ga.values(), gc.values(), ta, tc)?;
    let res = residual_pressure(&gb, &g_t, params, 5.0 * h)?;
    let collar = res
        .values
        .iter()
        .filter(|(k, _)| gb.values()[*k] < opts.collar)
        .count();
    let pressure = ResidualSummary {
        name: "pressure".into(),
        sup: res.sup_where(|k| gb.values()[k] < opts.collar),
        evaluated: collar,
        skipped: res.skipped + res.evaluated - collar,
    };

    let (sb, anchor, normal) = pressure_anchor(&gb, b, params, opts.extension_cells)?;
    let patch = hodograph_solve(
        sb.as_ref(),
        &anchor,
        &normal,
        &HodographOptions::new(opts.residual_eta, h),
    )?;
    let pa = hodograph_resolve(
        pressure_anchor(&ga, a, params, opts.extension_cells)?
            .0
            .as_ref(),
        &patch,
        1e-12,
    )?;
    let pc = hodograph_resolve(
        pressure_anchor(&gc, c, params, opts.extension_cells)?
            .0
            .as_ref(),
        &patch,
        1e-12,
    )?;
    let h_t = centered_time_derivative(&pa.h, &pc.h, ta, tc)?;
    let res = residual_hodograph(&patch, &h_t, params, 5.0 * h)?;
    let hodograph = ResidualSummary {
        name: "hodograph".into(),
        sup: res.sup,
        evaluated: res.evaluated,
        skipped: res.skipped,
    };

    let grid = PolarGrid::for_zeta(
        1,
        opts.zeta_s[0],
        opts.zeta_s[1],
        opts.zeta_nodes,
        params.sigma_p,
    )?;
    let [za, zb, zc] = [a, b, c]
        .map(|s| legendre_transform(s, &grid, params).and_then(|u| rescaled_zeta(&u, params)));
    let (za, zb, zc) = (za?, zb?, zc?);
    let z_t = centered_time_derivative(&za.values, &zc.values, ta, tc)?;
    let res = residual_zeta(&zb, &z_t, params, opts.zeta_window[0], opts.zeta_window[1])?;
    let zeta = ResidualSummary {
        name: "zeta".into(),
        sup: res.sup,
        evaluated: res.evaluated,
        skipped: res.skipped,
    };

    Ok(vec![pressure, hodograph, zeta])
}

/// Eigenvalues of `H~`, the drift `b_hat` and its boundary value on hodograph
/// patches of the collar at each snapshot.
pub fn pinch_and_drift(
    states: &[&State],
    params: &FlowParams,
    opts: &SuiteOptions,
) -> Result<ConditionReport> {
    let (mut matrices, mut drift, mut deviation, mut shrinks) =
        (Vec::new(), Vec::new(), Vec::new(), 0u32);
    for s in states {
        let h = s.step();
        let g = to_pressure(s, params)?;
        let (sampler, anchor, normal) = pressure_anchor(&g, s, params, opts.extension_cells)?;
        let patch = hodograph_solve(
            sampler.as_ref(),
            &anchor,
            &normal,
            &HodographOptions::new(opts.pinch_eta, h),
        )?;
        shrinks += patch.shrinks;
        matrices.extend(assemble_htilde(&patch, params).into_iter().map(|(_, m)| m));
        for p in linearized_coefficients(&patch, params)?.points {
            drift.push(p.b_hat);
            // interface-adjacent nodes
            if (p.z - patch.step).abs() <= 1e-12 * patch.step {
                deviation.push((p.b_hat / p.boundary_b_hat - 1.0).abs());
            }
        }
    }
    let mut report = ConditionReport::new("pinch and drift");
    let mut eig = check_matrix_pinch(&matrices, opts.pinch_bounds[0], opts.pinch_bounds[1])
        .checks
        .remove(0);
    eig.name = "H~ eigenvalues".into();
    report.push(eig.measure("patch shrinks", shrinks as f64));
    report.push(Check::range(
        "b_hat",
        drift,
        opts.drift_floor,
        f64::INFINITY,
    ));
    report.push(Check::range(
        "b_hat boundary deviation",
        deviation,
        0.0,
        opts.boundary_tolerance,
    ));
    Ok(report)
}

/// Flat volume non-increasing (one cell of slack) and a linear recession of
/// the inner radius.
pub fn interface_kinematics(
    states: &[&State],
    n: usize,
    opts: &SuiteOptions,
) -> Result<ConditionReport> {
    if states.len() < 3 {
        return Err(FlowError::InsufficientSamples {
            usable: states.len(),
            required: 3,
        });
    }
    let ifaces = states
        .iter()
        .map(|s| extract_interface(s, n, DEFAULT_EPS_INT))
        .collect::<Result<Vec<_>>>()?;
    let cell = states[0].step().powi(n as i32);
    let rise = ifaces
        .windows(2)
        .map(|w| w[1].flat_volume - w[0].flat_volume)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut report = ConditionReport::new("interface kinematics");
    report.push(
        Check::new("flat volume non-increasing", rise <= cell)
            .measure("max increase", rise)
            .threshold("slack", cell),
    );
    let ts: Vec<f64> = ifaces.iter().map(|i| i.time).collect();
    let rec: Vec<f64> = ifaces
        .iter()
        .map(|i| ifaces[0].inner_radius - i.inner_radius)
        .collect();
    let (slope, _, r2) = fit_line(&ts, &rec)?;
    report.push(
        Check::new("linear recession", r2 >= opts.recession_r_squared)
            .measure("r_squared", r2)
            .measure("speed", slope)
            .threshold("min_r_squared", opts.recession_r_squared),
    );
    Ok(report)
}

/// `C_mu^{2+alpha}` report of the pressure in the interface chart over the
/// given equally spaced snapshots.
pub fn holder_report(
    states: &[&State],
    params: &FlowParams,
    opts: &SuiteOptions,
) -> Result<HolderReport> {
    let first = states.first().ok_or(FlowError::InsufficientSamples {
        usable: 0,
        required: 1,
    })?;
    let step = 2.0 * first.step();
    let slices = states
        .iter()
        .map(|s| {
            let g = to_pressure(s, params)?;
            let (sampler, anchor, normal) = pressure_anchor(&g, s, params, opts.extension_cells)?;
            ChartSlice::new(sampler, anchor, &normal)
        })
        .collect::<Result<Vec<_>>>()?;
    let chart = InterfaceChart::new(slices, step)?;
    let cyl = MuCylinder::new(
        opts.holder_half_width,
        [0.0, opts.holder_depth],
        chart.time_range(),
    )?;
    let hopts = HolderOptions {
        alpha: opts.holder_alpha,
        pairs: opts.holder_pairs,
        seed: opts.seed,
        exec: Exec::default(),
    };
    holder_norm_c2alpha_mu(&chart, &cyl, &hopts)
}

fn named(name: &str, fit: ExponentFit, target: f64, tolerance: f64, min_r2: f64) -> NamedFit {
    let passed = fit.within(target, tolerance) && fit.r_squared >= min_r2;
    NamedFit {
        name: name.into(),
        target,
        tolerance,
        passed,
        fit,
    }
}

/// Runs `analyses` on `states`, measuring at time `t`.
pub fn verify_trajectory(
    states: &[State],
    params: &FlowParams,
    t: f64,
    analyses: &[Analysis],
    opts: &SuiteOptions,
) -> Result<VerificationReport> {
    let sigma = params.require_sigma_positive()?;
    let mut report = VerificationReport::new(opts.seed);
    let at = |t: f64| snapshot_at(states, t);
    let triple =
        || -> Result<[&State; 3]> { Ok([at(t - opts.delta)?, at(t)?, at(t + opts.delta)?]) };
    let mut order = analyses.to_vec();
    order.sort();
    order.dedup();
    for a in order {
        match a {
            Analysis::InitialConditions => {
                let io = InitialCheckOptions {
                    seed: opts.seed,
                    ..Default::default()
                };
                report
                    .conditions
                    .push(check_initial_conditions(at(0.0)?, params, &io)?);
            }
            Analysis::Exponent => {
                let fit = exponent_fit(at(t)?, params, opts.fit_window)?;
                report.fits.push(named(
                    "v ~ dist^(1+1/sigma)",
                    fit,
                    1.0 + 1.0 / sigma,
                    opts.fit_tolerance,
                    opts.min_r_squared,
                ));
            }
            Analysis::Dual => {
                let [speed, tangential] = dual_fits(triple()?, params, opts)?;
                report
                    .fits
                    .push(named("-u_t ~ r", speed, 1.0, opts.dual_tolerance, 0.0));
                report.fits.push(named(
                    "u_xixi ~ 1/r",
                    tangential,
                    -1.0,
                    opts.dual_tolerance,
                    0.0,
                ));
            }
            Analysis::Residuals => {
                report
                    .residuals
                    .extend(collar_residuals(triple()?, params, opts)?)
            }
            Analysis::Pinch => {
                let slices = even_times(t, opts.pinch_slices)
                    .skip(1)
                    .map(at)
                    .collect::<Result<Vec<_>>>()?;
                report
                    .conditions
                    .push(pinch_and_drift(&slices, params, opts)?);
            }
            Analysis::Kinematics => {
                let slices: Vec<&State> = states.iter().filter(|s| s.time() <= t + 1e-12).collect();
                report
                    .conditions
                    .push(interface_kinematics(&slices, params.n, opts)?);
            }
            Analysis::Holder => {
                let slices = (0..3)
                    .rev()
                    .map(|k| at(t - k as f64 * opts.holder_spacing))
                    .collect::<Result<Vec<_>>>()?;
                let r = holder_report(&slices, params, opts)?;
                report.statistics.insert("holder_total".into(), r.total);
                report
                    .holder
                    .push(("pressure".into(), HolderEntry::Plain(r)));
            }
            Analysis::Transversality => {
                let slices = triple()?
                    .iter()
                    .map(|s| to_pressure(s, params))
                    .collect::<Result<Vec<_>>>()?;
                let to = TransversalityOptions {
                    collar: opts.collar,
                    ..Default::default()
                };
                report
                    .conditions
                    .push(check_transversality(&slices, params.n, &to)?);
            }
            Analysis::Intermediate => {
                let window: Vec<State> = states
                    .iter()
                    .filter(|s| s.time() >= 0.5 * t - 1e-12 && s.time() <= t + 1e-12)
                    .cloned()
                    .collect();
                let io = IntermediateOptions {
                    pairs: opts.intermediate_pairs,
                    seed: opts.seed,
                    ..Default::default()
                };
                let e = intermediate_estimate_sup(&window, params, [0.5 * t, t], &io)?;
                report
                    .statistics
                    .insert("intermediate_estimate".into(), e.sup);
            }
        }
    }
    Ok(report)
}
