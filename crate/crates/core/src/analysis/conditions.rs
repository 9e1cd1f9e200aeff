//! Checkable surrogates of the non-degeneracy and coefficient conditions.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::{fold_max, fold_min, map_indexed, Exec};
use crate::params::FlowParams;
use crate::solver::{extract_interface, State};
use crate::transforms::{
    pressure_of, to_pressure, FieldSampler, GridSampler, LinearizedCoefficients, PressureField,
    RadialSampler,
};

use super::chart::{ChartSlice, InterfaceChart};
use super::holder::{holder_norm_c2alpha_mu, HolderOptions, MuCylinder};
use super::report::{Check, ConditionReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCheckOptions {
    pub lambda0: f64,
    /// Bounds on the principal curvatures of the level sets.
    pub curvature: [f64; 2],
    /// Levels `eps` of `{v = eps}`; the smallest one stands in for the interface.
    pub eps_ladder: Vec<f64>,
    pub alpha: f64,
    pub holder_pairs: usize,
    pub seed: u64,
    /// Chart size for the Hölder quotient of `g`.
    pub chart_depth: f64,
}

impl Default for InitialCheckOptions {
    fn default() -> Self {
        Self {
            lambda0: 0.5,
            curvature: [0.5, 2.0],
            eps_ladder: vec![1e-4, 1e-3, 1e-2],
            alpha: 0.25,
            holder_pairs: 20_000,
            seed: 0,
            chart_depth: 0.1,
        }
    }
}

/// Points of `{v = eps}` in the plane; radial data gives a 64-gon on the level circle.
fn level_points(state: &State, n: usize, eps: f64) -> Result<Vec<[f64; 2]>> {
    let iface = extract_interface(state, n, eps)?;
    match state {
        State::Radial(_) => {
            let r = iface.outer_radius;
            Ok((0..64)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                    [r * a.cos(), r * a.sin()]
                })
                .collect())
        }
        State::Graph(_) => Ok(iface.contour),
    }
}

/// Curvature of the circle through three points.
pub fn three_point_curvature(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let d = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    2.0 * cross.abs() / (d(a, b) * d(b, c) * d(a, c))
}

fn polyline_curvatures(pts: &[[f64; 2]]) -> Vec<f64> {
    let m = pts.len();
    if m < 3 {
        return Vec::new();
    }
    let k = (m / 12).max(1);
    (0..m)
        .map(|i| three_point_curvature(pts[(i + m - k) % m], pts[i], pts[(i + k) % m]))
        .collect()
}

/// Outward unit normals of a closed polyline around its centroid.
fn outward_normals(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let m = pts.len();
    let c = pts.iter().fold([0.0, 0.0], |acc, p| {
        [acc[0] + p[0] / m as f64, acc[1] + p[1] / m as f64]
    });
    (0..m)
        .map(|i| {
            let (a, b) = (pts[(i + m - 1) % m], pts[(i + 1) % m]);
            let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
            let len = (tx * tx + ty * ty).sqrt().max(f64::MIN_POSITIVE);
            let mut nrm = [ty / len, -tx / len];
            if nrm[0] * (pts[i][0] - c[0]) + nrm[1] * (pts[i][1] - c[1]) < 0.0 {
                nrm = [-nrm[0], -nrm[1]];
            }
            nrm
        })
        .collect()
}

/// Field value at a planar point; radial data is read along the radius.
fn height_at(state: &State, y: [f64; 2]) -> Option<f64> {
    match state {
        State::Radial(r) => {
            let rho = (y[0] * y[0] + y[1] * y[1]).sqrt();
            let f = rho / r.step;
            let i = f.floor() as usize;
            if i + 1 >= r.len() {
                return None;
            }
            let a = f - i as f64;
            Some((1.0 - a) * r.values[i] + a * r.values[i + 1])
        }
        State::Graph(g) => g.interpolate(y),
    }
}

/// (I1)-(I4) on an initial state. Report-only: every failure is a failed check.
pub fn check_initial_conditions(
    state: &State,
    params: &FlowParams,
    opts: &InitialCheckOptions,
) -> Result<ConditionReport> {
    let sigma = params.require_sigma_positive()?;
    let n = params.n;
    let h = state.step();
    let mut report = ConditionReport::new("initial conditions");

    let mut curvatures = Vec::new();
    for &eps in &opts.eps_ladder {
        curvatures.extend(polyline_curvatures(&level_points(state, n, eps)?));
    }
    report.push(Check::range(
        "I1 level-set curvature",
        curvatures,
        opts.curvature[0],
        opts.curvature[1],
    ));

    let eps0 = opts
        .eps_ladder
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let pts = if eps0.is_finite() {
        level_points(state, n, eps0)?
    } else {
        Vec::new()
    };
    let normals = outward_normals(&pts);
    // interpolate g, not v: g is the variable that is smooth across the interface
    let g_state = state.with_values(
        state
            .values()
            .iter()
            .map(|&v| pressure_of(v.max(0.0), sigma))
            .collect(),
        state.time(),
    );
    let g_at = |y: [f64; 2]| height_at(&g_state, y);
    let shifted = |p: [f64; 2], nu: [f64; 2], s: f64| [p[0] + s * nu[0], p[1] + s * nu[1]];

    let slopes: Vec<f64> = pts
        .iter()
        .zip(&normals)
        .map(
            |(&p, &nu)| match (g_at(shifted(p, nu, h)), g_at(shifted(p, nu, 2.0 * h))) {
                (Some(a), Some(b)) => (b - a) / h,
                _ => f64::NAN,
            },
        )
        .collect();
    report.push(Check::range(
        "I2 |Dg| on the interface",
        slopes,
        opts.lambda0,
        1.0 / opts.lambda0,
    ));

    let i3 = initial_holder(state, params, &pts, &normals, opts);
    report.push(match i3 {
        Ok(total) => Check::new("I3 C_mu^{2+alpha} quotient of g", total.is_finite())
            .measure("total", total)
            .threshold("alpha", opts.alpha),
        Err(e) => Check::new("I3 C_mu^{2+alpha} quotient of g", false).note(e.to_string()),
    });

    // |g_ij tau_i g_j| two cells outside the level set
    let mixed: Vec<f64> = pts
        .iter()
        .zip(&normals)
        .map(|(&p, &nu)| {
            let y = shifted(p, nu, 2.0 * h);
            let tau = [-nu[1], nu[0]];
            let f = |dx: f64, dy: f64| g_at([y[0] + dx, y[1] + dy]);
            let vals = (|| {
                let c = f(0.0, 0.0)?;
                let (xp, xm, yp, ym) = (f(h, 0.0)?, f(-h, 0.0)?, f(0.0, h)?, f(0.0, -h)?);
                let xy = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
                let grad = [(xp - xm) / (2.0 * h), (yp - ym) / (2.0 * h)];
                let hess = [
                    [(xp - 2.0 * c + xm) / (h * h), xy],
                    [xy, (yp - 2.0 * c + ym) / (h * h)],
                ];
                let mut s = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        s += hess[i][j] * tau[i] * grad[j];
                    }
                }
                Some(s.abs())
            })();
            vals.unwrap_or(f64::NAN)
        })
        .collect();
    let sup = fold_max(mixed.iter().copied());
    let failed = mixed.iter().filter(|v| v.is_nan()).count();
    let mut i4 = Check::new(
        "I4 tangential-normal mixing",
        sup.is_some_and(f64::is_finite) && failed == 0,
    )
    .measure("points", mixed.len() as f64)
    .measure("unevaluated", failed as f64);
    if let Some(s) = sup {
        i4 = i4.measure("sup", s);
    }
    report.push(i4);
    Ok(report)
}

fn initial_holder(
    state: &State,
    params: &FlowParams,
    pts: &[[f64; 2]],
    normals: &[[f64; 2]],
    opts: &InitialCheckOptions,
) -> Result<f64> {
    let n = params.n;
    let g = to_pressure(state, params)?;
    let (sampler, anchor, normal): (Box<dyn FieldSampler>, Vec<f64>, Vec<f64>) = match &g.field {
        State::Radial(r) => {
            let s = RadialSampler::extended(r, n, 2.0 * r.step)?;
            let rho = s
                .level_radius(0.0)
                .ok_or_else(|| FlowError::domain("pressure has no zero level"))?;
            let mut a = vec![0.0; n];
            a[n - 1] = rho;
            let mut e = vec![0.0; n];
            e[n - 1] = 1.0;
            (Box::new(s), a, e)
        }
        State::Graph(grid) => {
            let (p, nu) = pts
                .first()
                .zip(normals.first())
                .ok_or_else(|| FlowError::domain("no interface contour"))?;
            (Box::new(GridSampler::new(grid)), p.to_vec(), nu.to_vec())
        }
    };
    let chart = InterfaceChart::new(
        vec![ChartSlice::new(sampler, anchor, &normal)?],
        2.0 * state.step(),
    )?;
    let cyl = MuCylinder::new(
        0.5 * opts.chart_depth,
        [0.0, opts.chart_depth],
        [state.time(); 2],
    )?;
    let hopts = HolderOptions {
        alpha: opts.alpha,
        pairs: opts.holder_pairs,
        seed: opts.seed,
        exec: Exec::default(),
    };
    let r = holder_norm_c2alpha_mu(&chart, &cyl, &hopts)?;
    if r.pairs_used == 0 {
        return Err(FlowError::InsufficientSamples {
            usable: 0,
            required: 1,
        });
    }
    Ok(r.total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityOptions {
    /// Upper end of the band `{floor < g < collar}`.
    pub collar: f64,
    /// Nodes with `g <= floor` are left out; the front is smeared over a few cells.
    pub floor: f64,
    pub bounds: [f64; 2],
}

impl Default for TransversalityOptions {
    fn default() -> Self {
        Self {
            collar: 0.2,
            floor: 0.0,
            bounds: [0.1, 10.0],
        }
    }
}

struct BandSample {
    g_t: f64,
    grad: f64,
    ratio: f64,
}

/// `g_t`, `|Dg|` and `g / dist(., Gamma_t)` on the band near the interface,
/// with centered time differences between neighbouring pressure slices.
pub fn check_transversality(
    slices: &[PressureField],
    n: usize,
    opts: &TransversalityOptions,
) -> Result<ConditionReport> {
    if slices.len() < 2 {
        return Err(FlowError::InsufficientSamples {
            usable: slices.len(),
            required: 2,
        });
    }
    let mut samples = Vec::new();
    let k_range = if slices.len() == 2 {
        0..1
    } else {
        1..slices.len() - 1
    };
    for k in k_range {
        let (before, after) = if slices.len() == 2 {
            (0, 1)
        } else {
            (k - 1, k + 1)
        };
        let dt = slices[after].time() - slices[before].time();
        if !(dt > 0.0) {
            return Err(FlowError::invalid(
                "pressure slices must have increasing times",
            ));
        }
        let (gb, ga) = (slices[before].values(), slices[after].values());
        if gb.len() != slices[k].values().len() || ga.len() != gb.len() {
            return Err(FlowError::invalid(
                "pressure slices live on different grids",
            ));
        }
        samples.extend(band_samples(&slices[k].field, n, opts, |i| {
            (ga[i] - gb[i]) / dt
        })?);
    }
    let [lo, hi] = opts.bounds;
    let mut report = ConditionReport::new("transversality");
    report.push(Check::range("g_t", samples.iter().map(|s| s.g_t), lo, hi));
    report.push(Check::range("|Dg|", samples.iter().map(|s| s.grad), lo, hi));
    report.push(
        Check::range("g/dist", samples.iter().map(|s| s.ratio), lo, hi)
            .threshold("floor", opts.floor),
    );
    Ok(report)
}

fn band_samples(
    g: &State,
    n: usize,
    opts: &TransversalityOptions,
    g_t: impl Fn(usize) -> f64 + Sync,
) -> Result<Vec<BandSample>> {
    let in_band = |v: f64| v > opts.floor && v < opts.collar;
    match g {
        State::Radial(r) => {
            let threshold = opts.floor.max(2.0 * r.step);
            let rho_i = RadialSampler::extended(r, n, threshold)?
                .level_radius(0.0)
                .ok_or_else(|| FlowError::domain("pressure profile has no zero level"))?;
            let v = &r.values;
            Ok((1..v.len() - 1)
                .filter(|&i| in_band(v[i]) && r.rho(i) > rho_i)
                .map(|i| BandSample {
                    g_t: g_t(i),
                    grad: ((v[i + 1] - v[i - 1]) / (2.0 * r.step)).abs(),
                    ratio: v[i] / (r.rho(i) - rho_i),
                })
                .collect())
        }
        State::Graph(grid) => {
            let level = opts.floor.max(1e-12);
            let contour = extract_interface(g, n, level)?.contour;
            if contour.len() < 2 {
                return Err(FlowError::domain("pressure field has no interface contour"));
            }
            let nodes: Vec<(usize, usize)> = (1..grid.ny - 1)
                .flat_map(|j| (1..grid.nx - 1).map(move |i| (i, j)))
                .filter(|&(i, j)| in_band(grid.at(i, j)))
                .collect();
            let h = grid.step;
            Ok(map_indexed(Exec::default(), nodes.len(), |k| {
                let (i, j) = nodes[k];
                let gx = (grid.at(i + 1, j) - grid.at(i - 1, j)) / (2.0 * h);
                let gy = (grid.at(i, j + 1) - grid.at(i, j - 1)) / (2.0 * h);
                let y = grid.point(i, j);
                let dist = polyline_distance(&contour, y);
                BandSample {
                    g_t: g_t(grid.idx(i, j)),
                    grad: gx.hypot(gy),
                    ratio: grid.at(i, j) / dist,
                }
            }))
        }
    }
}

pub(crate) fn polyline_distance(pts: &[[f64; 2]], y: [f64; 2]) -> f64 {
    let m = pts.len();
    let seg = |a: [f64; 2], b: [f64; 2]| {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let s = if len2 > 0.0 {
            (((y[0] - a[0]) * dx + (y[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (y[0] - a[0] - s * dx).hypot(y[1] - a[1] - s * dy)
    };
    fold_min((0..m).map(|k| seg(pts[k], pts[(k + 1) % m]))).unwrap_or(f64::INFINITY)
}

/// Extreme eigenvalues of a field of symmetric matrices against `[low, high]`.
pub fn check_matrix_pinch(matrices: &[DMatrix<f64>], low: f64, high: f64) -> ConditionReport {
    let eig: Vec<(f64, f64)> = map_indexed(Exec::default(), matrices.len(), |k| {
        let m = &matrices[k];
        let sym = (m + m.transpose()) * 0.5;
        let e = SymmetricEigen::new(sym).eigenvalues;
        (e.min(), e.max())
    });
    let mut report = ConditionReport::new("matrix pinch");
    report.push(Check::range(
        "eigenvalues",
        eig.iter().flat_map(|&(a, b)| [a, b]),
        low,
        high,
    ));
    report
}

/// Coefficients of `x_n a_nn D_nn + 2 sqrt(x_n) a_in D_in + a_ij D_ij + b_i D_i` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPoint {
    pub x_n: f64,
    pub a: DMatrix<f64>,
    /// Last entry is the normal drift `b_n`.
    pub b: Vec<f64>,
}

impl From<&LinearizedCoefficients> for Vec<CoefficientPoint> {
    fn from(c: &LinearizedCoefficients) -> Self {
        c.points
            .iter()
            .map(|p| {
                let mut b = p.tangential_drift.clone();
                b.push(p.b_hat);
                CoefficientPoint {
                    x_n: p.z,
                    a: p.a_matrix(),
                    b,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorCheckOptions {
    pub lambda: f64,
    pub nu: f64,
    /// Points with `x_n <= boundary_tol` count as boundary points.
    pub boundary_tol: f64,
    /// Lower bound for the normal drift everywhere, when set.
    pub drift_threshold: Option<f64>,
}

impl Default for OperatorCheckOptions {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            nu: 1.0,
            boundary_tol: 0.0,
            drift_threshold: Some(0.1),
        }
    }
}

/// Ellipticity, coefficient bounds, `2 b_n / a_nn >= nu`, `b_n >= lambda` on
/// `{x_n = 0}` and, optionally, a lower bound on `b_n` everywhere.
pub fn check_degenerate_operator_hypotheses(
    points: &[CoefficientPoint],
    opts: &OperatorCheckOptions,
) -> ConditionReport {
    let lambda = opts.lambda;
    let mut report = ConditionReport::new("degenerate operator hypotheses");
    let eig: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            let e = SymmetricEigen::new((&p.a + p.a.transpose()) * 0.5).eigenvalues;
            (e.min(), e.max())
        })
        .collect();
    report.push(Check::range(
        "ellipticity",
        eig.iter().map(|e| e.0),
        lambda,
        f64::INFINITY,
    ));
    let size = points.iter().map(|p| {
        let a = p.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        p.b.iter().fold(a, |m, v| m.max(v.abs()))
    });
    report.push(Check::range("coefficient bound", size, 0.0, 1.0 / lambda));
    let ratio = points.iter().map(|p| {
        let n = p.b.len();
        2.0 * p.b[n - 1] / p.a[(n - 1, n - 1)]
    });
    report.push(Check::range("2 b_n / a_nn", ratio, opts.nu, f64::INFINITY));
    let boundary = points
        .iter()
        .filter(|p| p.x_n <= opts.boundary_tol)
        .map(|p| p.b[p.b.len() - 1]);
    report.push(
        Check::range("b_n on x_n = 0", boundary, lambda, f64::INFINITY)
            .threshold("boundary_tol", opts.boundary_tol),
    );
    if let Some(t) = opts.drift_threshold {
        report.push(Check::range(
            "normal drift",
            points.iter().map(|p| p.b[p.b.len() - 1]),
            t,
            f64::INFINITY,
        ));
    }
    report
}
