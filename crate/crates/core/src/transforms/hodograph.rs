//! Hodograph chart: near an interface point, solve `g(y', y_n) = z` for
//! `y_n = -h(y', z)` column by column, which flattens the interface onto `z = 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::{map_indexed, Exec};
use crate::params::FlowParams;

use super::sampler::FieldSampler;
use super::Residual;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HodographOptions {
    /// Requested half-width of the cylinder `|y'| < eta, 0 <= z < eta`.
    pub eta: f64,
    /// Node spacing in every chart direction.
    pub step: f64,
    /// Required lower bound on `g_n` at the anchor.
    pub lambda: f64,
    pub shrink: f64,
    pub max_shrinks: u32,
    /// Bisection stops once the bracket is narrower than this.
    pub tol: f64,
    /// Columns start from the bracket `y_n in [-reach * eta, reach * eta]`.
    pub reach: f64,
}

impl HodographOptions {
    pub fn new(eta: f64, step: f64) -> Self {
        Self {
            eta,
            step,
            lambda: 0.1,
            shrink: 0.8,
            max_shrinks: 30,
            tol: 1e-12,
            reach: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HodographPatch {
    pub n: usize,
    pub anchor: Vec<f64>,
    /// Orthonormal chart frame; the last vector is the interface normal.
    pub frame: Vec<Vec<f64>>,
    pub eta: f64,
    pub eta_requested: f64,
    pub shrinks: u32,
    pub step: f64,
    /// Nodes per tangential axis (odd, centred on the anchor).
    pub nt: usize,
    /// Nodes along `z`, starting at `z = 0`.
    pub nz: usize,
    /// `h` at every node; the `z` index runs fastest.
    pub h: Vec<f64>,
    pub time: f64,
    /// Measured one-sided `g_n` at the anchor.
    pub transversality: f64,
}

/// Value, gradient and Hessian of `h` at a patch node, in chart coordinates
/// `(y'_1, ..., y'_{n-1}, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HodographJet {
    pub node: usize,
    pub y_prime: Vec<f64>,
    pub z: f64,
    pub h: f64,
    pub grad: Vec<f64>,
    /// Row-major `n x n`.
    pub hess: Vec<f64>,
}

impl HodographJet {
    pub fn h_z(&self) -> f64 {
        self.grad[self.grad.len() - 1]
    }

    fn tangential_grad2(&self) -> f64 {
        self.grad[..self.grad.len() - 1].iter().map(|d| d * d).sum()
    }
}

impl HodographPatch {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    fn dims(&self) -> usize {
        self.n - 1
    }

    fn stride(&self, axis: usize) -> usize {
        let d = self.dims();
        if axis == d {
            1
        } else {
            self.nz * self.nt.pow((d - 1 - axis) as u32)
        }
    }

    /// Tangential indices and `z` index of a node.
    pub fn multi_index(&self, node: usize) -> (Vec<usize>, usize) {
        let d = self.dims();
        let c = node % self.nz;
        let mut rest = node / self.nz;
        let mut a = vec![0; d];
        for i in (0..d).rev() {
            a[i] = rest % self.nt;
            rest /= self.nt;
        }
        (a, c)
    }

    /// Chart coordinates `(y', z)` of a node.
    pub fn coords(&self, node: usize) -> (Vec<f64>, f64) {
        let (a, c) = self.multi_index(node);
        let mid = (self.nt - 1) as f64 / 2.0;
        (
            a.iter().map(|&k| (k as f64 - mid) * self.step).collect(),
            c as f64 * self.step,
        )
    }

    /// Physical position of the chart point `(y', y_n)`.
    pub fn physical(&self, y_prime: &[f64], y_n: f64) -> Vec<f64> {
        chart_point(&self.anchor, &self.frame, y_prime, y_n)
    }

    pub fn same_layout(&self, other: &HodographPatch) -> bool {
        self.n == other.n
            && self.nt == other.nt
            && self.nz == other.nz
            && self.step == other.step
            && self.anchor == other.anchor
            && self.frame == other.frame
    }

    fn interior(&self, node: usize) -> bool {
        let (a, c) = self.multi_index(node);
        c >= 1 && c + 1 < self.nz && a.iter().all(|&k| k >= 1 && k + 1 < self.nt)
    }

    /// Central-difference jets at every interior node.
    pub fn jets(&self) -> Vec<HodographJet> {
        let n = self.n;
        let h2 = self.step * self.step;
        let strides: Vec<usize> = (0..n).map(|i| self.stride(i)).collect();
        (0..self.len())
            .filter(|&k| self.interior(k))
            .map(|k| {
                let f = |off: isize| self.h[(k as isize + off) as usize];
                let mut grad = vec![0.0; n];
                let mut hess = vec![0.0; n * n];
                for i in 0..n {
                    let si = strides[i] as isize;
                    grad[i] = (f(si) - f(-si)) / (2.0 * self.step);
                    hess[i * n + i] = (f(si) - 2.0 * f(0) + f(-si)) / h2;
                    for j in i + 1..n {
                        let sj = strides[j] as isize;
                        let v = (f(si + sj) - f(si - sj) - f(-si + sj) + f(-si - sj)) / (4.0 * h2);
                        hess[i * n + j] = v;
                        hess[j * n + i] = v;
                    }
                }
                let (y_prime, z) = self.coords(k);
                HodographJet {
                    node: k,
                    y_prime,
                    z,
                    h: f(0),
                    grad,
                    hess,
                }
            })
            .collect()
    }
}

fn chart_point(anchor: &[f64], frame: &[Vec<f64>], y_prime: &[f64], y_n: f64) -> Vec<f64> {
    let n = anchor.len();
    let mut y = anchor.to_vec();
    for (i, &c) in y_prime.iter().enumerate() {
        for d in 0..n {
            y[d] += c * frame[i][d];
        }
    }
    for d in 0..n {
        y[d] += y_n * frame[n - 1][d];
    }
    y
}

/// Orthonormal frame whose last vector is `normal`.
pub fn frame_from_normal(normal: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = normal.len();
    let norm = normal.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(FlowError::invalid(
            "interface normal must be a nonzero vector",
        ));
    }
    let e: Vec<f64> = normal.iter().map(|c| c / norm).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    // standard axes ordered by how far they are from the normal
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs()));
    for &ax in &axes {
        if basis.len() == n - 1 {
            break;
        }
        let mut v: Vec<f64> = (0..n).map(|d| if d == ax { 1.0 } else { 0.0 }).collect();
        for b in basis.iter().chain(std::iter::once(&e)) {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for d in 0..n {
                v[d] -= dot * b[d];
            }
        }
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > 1e-8 {
            basis.push(v.iter().map(|c| c / len).collect());
        }
    }
    if n == 2 {
        // right-handed for n = 2
        basis[0] = vec![e[1], -e[0]];
    }
    basis.push(e);
    Ok(basis)
}

/// Root of `g(y', y_n) = z` in the column over `y'`: the lower end `lo` must
/// satisfy `g <= z`; the upper end starts at `hi` and doubles (at most 8
/// times) until `g > z`. Bisection then narrows the bracket below `tol`.
#[allow(clippy::too_many_arguments)]
fn solve_column(
    sampler: &dyn FieldSampler,
    anchor: &[f64],
    frame: &[Vec<f64>],
    y_prime: &[f64],
    z: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Option<f64> {
    let g = |y_n: f64| sampler.value(&chart_point(anchor, frame, y_prime, y_n));
    let (mut lo, mut hi) = (lo, hi);
    if g(lo)? > z {
        return None;
    }
    let mut grow = 0;
    while !(g(hi)? > z) {
        grow += 1;
        if grow > 8 {
            return None;
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? > z {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Builds the patch anchored at the interface point `anchor` with outer
/// normal `normal`, shrinking `eta` until every column brackets its root.
pub fn hodograph_solve(
    sampler: &dyn FieldSampler,
    anchor: &[f64],
    normal: &[f64],
    options: &HodographOptions,
) -> Result<HodographPatch> {
    let n = sampler.dim();
    if !(2..=3).contains(&n) || anchor.len() != n || normal.len() != n {
        return Err(FlowError::Unsupported(format!(
            "hodograph patches need n in {{2, 3}}, got {n}"
        )));
    }
    if !(options.step > 0.0 && options.eta >= 2.0 * options.step && options.tol > 0.0) {
        return Err(FlowError::invalid(format!(
            "patch needs step > 0 and eta >= 2 step (eta = {}, step = {})",
            options.eta, options.step
        )));
    }
    if !(options.shrink > 0.0 && options.shrink < 1.0) {
        return Err(FlowError::invalid("shrink factor must lie in (0, 1)"));
    }
    let frame = frame_from_normal(normal)?;

    let g0 = sampler
        .value(anchor)
        .ok_or_else(|| FlowError::domain("anchor lies outside the sampled field"))?;
    let ahead = chart_point(anchor, &frame, &vec![0.0; n - 1], options.step);
    let g1 = sampler
        .value(&ahead)
        .ok_or_else(|| FlowError::domain("anchor is too close to the field boundary"))?;
    let slope = (g1 - g0) / options.step;
    if !(slope >= options.lambda) {
        return Err(FlowError::domain(format!(
            "transversality fails at the anchor: g_n = {slope} < lambda = {}",
            options.lambda
        )));
    }

    let mut eta = options.eta;
    let mut shrinks = 0;
    loop {
        let half = (eta / options.step).floor() as usize;
        let nt = 2 * half + 1;
        let nz = half + 1;
        let count = nt.pow((n - 1) as u32) * nz;
        let lo = -options.reach * eta;
        let hi = options.reach * eta;
        let layout = HodographPatch {
            n,
            anchor: anchor.to_vec(),
            frame: frame.clone(),
            eta,
            eta_requested: options.eta,
            shrinks,
            step: options.step,
            nt,
            nz,
            h: Vec::new(),
            time: sampler.time(),
            transversality: slope,
        };
        let roots = map_indexed(Exec::default(), count, |k| {
            let (y_prime, z) = layout.coords(k);
            solve_column(sampler, anchor, &frame, &y_prime, z, lo, hi, options.tol).map(|y_n| -y_n)
        });
        if roots.iter().all(Option::is_some) {
            return Ok(HodographPatch {
                h: roots.into_iter().flatten().collect(),
                ..layout
            });
        }
        shrinks += 1;
        eta *= options.shrink;
        if shrinks > options.max_shrinks || eta < 2.0 * options.step {
            let bad = roots.iter().position(Option::is_none).unwrap_or(0);
            let (y_prime, z) = layout.coords(bad);
            return Err(FlowError::RootNotBracketed {
                location: format!("y' = {y_prime:?}, z = {z}"),
            });
        }
    }
}

/// Re-solves a patch on the exact layout of `like` for another sampler
/// (for example a neighbouring time level).
pub fn hodograph_resolve(
    sampler: &dyn FieldSampler,
    like: &HodographPatch,
    tol: f64,
) -> Result<HodographPatch> {
    if sampler.dim() != like.n {
        return Err(FlowError::invalid(
            "sampler dimension differs from the patch",
        ));
    }
    let lo = -2.0 * like.eta;
    let hi = 2.0 * like.eta;
    let roots = map_indexed(Exec::default(), like.len(), |k| {
        let (y_prime, z) = like.coords(k);
        solve_column(sampler, &like.anchor, &like.frame, &y_prime, z, lo, hi, tol).map(|y_n| -y_n)
    });
    if let Some(bad) = roots.iter().position(Option::is_none) {
        let (y_prime, z) = like.coords(bad);
        return Err(FlowError::RootNotBracketed {
            location: format!("y' = {y_prime:?}, z = {z}"),
        });
    }
    Ok(HodographPatch {
        h: roots.into_iter().flatten().collect(),
        time: sampler.time(),
        ..like.clone()
    })
}

/// The matrix `H~` at one jet.
pub fn htilde_from_jet(jet: &HodographJet, sigma: f64) -> DMatrix<f64> {
    let n = jet.grad.len();
    let d = n - 1;
    let rz = jet.z.max(0.0).sqrt();
    DMatrix::from_fn(n, n, |i, j| match (i == d, j == d) {
        (false, false) => jet.hess[i * n + j],
        (true, true) => jet.z * jet.hess[d * n + d] - jet.h_z() / sigma,
        _ => rz * jet.hess[i * n + j],
    })
}

fn det_small(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.determinant(),
    }
}

fn adjugate_small(m: &DMatrix<f64>) -> DMatrix<f64> {
    match m.nrows() {
        1 => DMatrix::from_element(1, 1, 1.0),
        2 => DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]),
        _ => DMatrix::from_fn(3, 3, |i, j| {
            // cofactor of (j, i)
            let rows: Vec<usize> = (0..3).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..3).filter(|&c| c != i).collect();
            let minor = m[(rows[0], cols[0])] * m[(rows[1], cols[1])]
                - m[(rows[0], cols[1])] * m[(rows[1], cols[0])];
            if (i + j) % 2 == 0 {
                minor
            } else {
                -minor
            }
        }),
    }
}

/// Inverse by the explicit adjugate for sizes up to 3.
pub fn invert_small(m: &DMatrix<f64>, node: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 || n > 3 || m.ncols() != n {
        return Err(FlowError::Unsupported(format!(
            "adjugate inverse for a {}x{} matrix",
            n,
            m.ncols()
        )));
    }
    let det = det_small(m);
    let adj = adjugate_small(m);
    let condition = m.norm() * adj.norm() / det.abs();
    if !(det != 0.0) || !condition.is_finite() || condition > 1e14 {
        return Err(FlowError::SingularMatrix { node, condition });
    }
    Ok(adj / det)
}

#[inline]
fn gradient_denominator(jet: &HodographJet, sigma: f64) -> f64 {
    let h_z = jet.h_z();
    h_z * h_z + jet.z.max(0.0).powf(2.0 / sigma) * (1.0 + jet.tangential_grad2())
}

/// Right-hand side of the hodograph equation at one jet.
pub fn hodograph_rhs(jet: &HodographJet, params: &FlowParams) -> f64 {
    let det = det_small(&htilde_from_jet(jet, params.sigma_p));
    det.max(0.0).powf(params.p)
        / gradient_denominator(jet, params.sigma_p).powf(params.gradient_exponent())
}

/// `H~` at every interior node.
pub fn assemble_htilde(patch: &HodographPatch, params: &FlowParams) -> Vec<(usize, DMatrix<f64>)> {
    patch
        .jets()
        .iter()
        .map(|j| (j.node, htilde_from_jet(j, params.sigma_p)))
        .collect()
}

/// `h_t - rhs(h)` at interior nodes with `z > z_min`.
pub fn residual_hodograph(
    patch: &HodographPatch,
    h_t: &[f64],
    params: &FlowParams,
    z_min: f64,
) -> Result<Residual> {
    if h_t.len() != patch.len() {
        return Err(FlowError::invalid("h_t and the patch differ in size"));
    }
    let jets = patch.jets();
    Ok(Residual::collect(jets.iter().map(|j| {
        (j.z > z_min).then(|| (j.node, h_t[j.node] - hodograph_rhs(j, params)))
    })))
}

/// Coefficients of the linearized operator at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedPoint {
    pub node: usize,
    pub z: f64,
    pub h_z: f64,
    /// `p H~^{-1}`, row-major `n x n`: the operator applies `a_ij`,
    /// `2 sqrt(z) a_in` and `z a_nn` to the respective second derivatives.
    pub a: Vec<f64>,
    /// Drift along `z`.
    pub b_hat: f64,
    /// Drifts along the tangential directions.
    pub tangential_drift: Vec<f64>,
    /// `-((n+1)p - 1) / h_z`, the value `b_hat` takes on `z = 0`.
    pub boundary_b_hat: f64,
}

impl LinearizedPoint {
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let n = self.tangential_drift.len() + 1;
        DMatrix::from_row_slice(n, n, &self.a)
    }
}

pub fn linearized_from_jet(jet: &HodographJet, params: &FlowParams) -> Result<LinearizedPoint> {
    let n = jet.grad.len();
    let (p, sigma) = (params.p, params.sigma_p);
    let inv = invert_small(&htilde_from_jet(jet, sigma), jet.node)?;
    let den = gradient_denominator(jet, sigma);
    let k = (n as f64 + 2.0) * p - 1.0;
    let h_z = jet.h_z();
    let b_hat = -(k * h_z / den + p / sigma * inv[(n - 1, n - 1)]);
    let zw = jet.z.max(0.0).powf(2.0 / sigma);
    let tangential_drift = (0..n - 1).map(|i| -k * zw / den * jet.grad[i]).collect();
    let a = (p * inv).transpose().iter().copied().collect();
    Ok(LinearizedPoint {
        node: jet.node,
        z: jet.z,
        h_z,
        a,
        b_hat,
        tangential_drift,
        boundary_b_hat: -((n as f64 + 1.0) * p - 1.0) / h_z,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedCoefficients {
    pub points: Vec<LinearizedPoint>,
}

pub fn linearized_coefficients(
    patch: &HodographPatch,
    params: &FlowParams,
) -> Result<LinearizedCoefficients> {
    let points = patch
        .jets()
        .iter()
        .map(|j| linearized_from_jet(j, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearizedCoefficients { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;
    use crate::solver::RadialProfile;
    use crate::transforms::{pressure_speed, RadialSampler};
    use approx::assert_abs_diff_eq;

    struct Fn2<F: Fn(&[f64]) -> f64 + Sync>(usize, F);

    impl<F: Fn(&[f64]) -> f64 + Sync> FieldSampler for Fn2<F> {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, y: &[f64]) -> Option<f64> {
            Some((self.1)(y))
        }
        fn time(&self) -> f64 {
            0.0
        }
    }

    fn jet(z: f64, grad: Vec<f64>, hess: Vec<f64>) -> HodographJet {
        HodographJet {
            node: 0,
            y_prime: vec![0.0; grad.len() - 1],
            z,
            h: 0.0,
            grad,
            hess,
        }
    }

    #[test]
    fn linear_pressure() {
        let p = derive_exponents(2, 1.0).unwrap();
        let s = Fn2(2, |y: &[f64]| y[1]);
        let patch = hodograph_solve(
            &s,
            &[0.0, 0.0],
            &[0.0, 1.0],
            &HodographOptions::new(0.2, 0.02),
        )
        .unwrap();
        assert_eq!(patch.shrinks, 0);
        for k in 0..patch.len() {
            let (_, z) = patch.coords(k);
            assert_abs_diff_eq!(patch.h[k], -z, epsilon = 1e-12);
        }
        for j in patch.jets() {
            assert_abs_diff_eq!(j.h_z(), -1.0, epsilon = 1e-9);
            // Dg = -(h_1, 1) / h_z
            assert_abs_diff_eq!(-j.grad[0] / j.h_z(), 0.0, epsilon = 1e-9);
            let m = htilde_from_jet(&j, p.sigma_p);
            assert_abs_diff_eq!(m[(1, 1)], 1.0 / p.sigma_p, epsilon = 1e-9);
            assert_abs_diff_eq!(m[(0, 1)], 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn bisection_reproduces_monotone_columns() {
        let s = Fn2(2, |y: &[f64]| y[1].exp() - 1.0 + 0.1 * y[0] * y[0]);
        let patch = hodograph_solve(
            &s,
            &[0.0, 0.0],
            &[0.0, 1.0],
            &HodographOptions::new(0.3, 0.05),
        )
        .unwrap();
        for k in 0..patch.len() {
            let (yp, z) = patch.coords(k);
            let exact = (1.0 + z - 0.1 * yp[0] * yp[0]).ln();
            assert!((-patch.h[k] - exact).abs() <= 1e-12, "{k}");
        }
    }

    #[test]
    fn radial_kink_slope_at_interface() {
        let r = RadialProfile::from_fn(2.0, 401, 0.0, |rho| 2f64.sqrt() * (rho - 1.0).max(0.0))
            .unwrap();
        let s = RadialSampler::extended(&r, 2, 1e-9).unwrap();
        let patch = hodograph_solve(
            &s,
            &[0.0, 1.0],
            &[0.0, 1.0],
            &HodographOptions::new(0.1, 0.01),
        )
        .unwrap();
        let mid = (patch.nt - 1) / 2;
        let node = mid * patch.nz + 1;
        let j = patch.jets().into_iter().find(|j| j.node == node).unwrap();
        assert_abs_diff_eq!(j.h_z(), -1.0 / 2f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn unbracketed_columns_shrink_the_patch() {
        // g saturates at 0.1, so levels above it have no root
        let s = Fn2(2, |y: &[f64]| y[1].clamp(-1.0, 0.1));
        let patch = hodograph_solve(
            &s,
            &[0.0, 0.0],
            &[0.0, 1.0],
            &HodographOptions::new(0.2, 0.01),
        )
        .unwrap();
        assert!(patch.shrinks > 0 && patch.eta < 0.1 + 0.01);
    }

    #[test]
    fn transversality_is_enforced() {
        let s = Fn2(2, |y: &[f64]| 0.01 * y[1]);
        let err = hodograph_solve(
            &s,
            &[0.0, 0.0],
            &[0.0, 1.0],
            &HodographOptions::new(0.2, 0.02),
        )
        .unwrap_err();
        assert!(matches!(err, FlowError::Domain(_)));
    }

    #[test]
    fn htilde_identity_and_drift_examples() {
        let p = derive_exponents(2, 1.0).unwrap();
        // h_ij = delta_ij, h_z = -sigma, z = 0
        let j = jet(0.0, vec![0.0, -p.sigma_p], vec![1.0, 0.0, 0.0, 0.0]);
        let m = htilde_from_jet(&j, p.sigma_p);
        assert_abs_diff_eq!((m - DMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-15);
        let lin = linearized_from_jet(&j, &p).unwrap();
        assert_abs_diff_eq!(lin.b_hat, 2.0, epsilon = 1e-14);
        // h_z = -1 boundary value
        let j = jet(0.0, vec![0.0, -1.0], vec![1.0, 0.0, 0.0, 0.0]);
        let lin = linearized_from_jet(&j, &p).unwrap();
        assert_abs_diff_eq!(lin.b_hat, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lin.boundary_b_hat, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adjugate_inverse_and_singular_fault() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let inv = invert_small(&m, 0).unwrap();
        assert_abs_diff_eq!(
            (&m * inv - DMatrix::identity(3, 3)).norm(),
            0.0,
            epsilon = 1e-14
        );
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            invert_small(&s, 7),
            Err(FlowError::SingularMatrix { node: 7, .. })
        ));
    }

    #[test]
    fn time_independent_patch_has_negative_residual() {
        let p = derive_exponents(2, 1.0).unwrap();
        let s = Fn2(2, |y: &[f64]| y[1] + 0.5 * y[0] * y[0]);
        let patch = hodograph_solve(
            &s,
            &[0.0, 0.0],
            &[0.0, 1.0],
            &HodographOptions::new(0.2, 0.02),
        )
        .unwrap();
        let res = residual_hodograph(&patch, &vec![0.0; patch.len()], &p, 0.0).unwrap();
        assert!(res.evaluated > 0);
        assert!(res.values.iter().all(|&(_, r)| r < 0.0));
        let rhs: Vec<f64> = {
            let mut v = vec![0.0; patch.len()];
            for j in patch.jets() {
                v[j.node] = hodograph_rhs(&j, &p);
            }
            v
        };
        assert_eq!(residual_hodograph(&patch, &rhs, &p, 0.0).unwrap().sup, 0.0);
    }

    /// `h_t = -h_z g_t` links the pressure and hodograph right-hand sides.
    fn cross_representation_gap(n: usize, p: f64, step: f64) -> f64 {
        let params = derive_exponents(n, p).unwrap();
        let g_of = |rho: f64| 1.3 * (rho - 0.8) + 0.4 * (rho - 0.8).powi(2);
        let s = Fn2(n, move |y: &[f64]| {
            g_of(y.iter().map(|c| c * c).sum::<f64>().sqrt())
        });
        let mut anchor = vec![0.0; n];
        anchor[n - 1] = 0.8;
        let mut normal = vec![0.0; n];
        normal[n - 1] = 1.0;
        let patch =
            hodograph_solve(&s, &anchor, &normal, &HodographOptions::new(0.1, step)).unwrap();
        let mut worst = 0.0f64;
        for j in patch.jets().iter().filter(|j| j.z > 0.02) {
            let y = patch.physical(&j.y_prime, -j.h);
            let rho = y.iter().map(|c| c * c).sum::<f64>().sqrt();
            let (g, g1, g2) = (g_of(rho), 1.3 + 0.8 * (rho - 0.8), 0.8);
            let grad: Vec<f64> = y.iter().map(|c| g1 * c / rho).collect();
            let mut hess = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    let (ua, ub) = (y[a] / rho, y[b] / rho);
                    let delta = if a == b { 1.0 } else { 0.0 };
                    hess[a * n + b] = g2 * ua * ub + g1 / rho * (delta - ua * ub);
                }
            }
            let via_g = -j.h_z() * pressure_speed(g, &grad, &hess, &params);
            worst = worst.max((hodograph_rhs(j, &params) - via_g).abs() / via_g.abs());
        }
        worst
    }

    #[test]
    fn hodograph_equation_matches_pressure_equation() {
        for &(n, p) in &[(2, 1.0), (2, 2.0), (3, 0.75)] {
            let coarse = cross_representation_gap(n, p, 0.01);
            let fine = cross_representation_gap(n, p, 0.005);
            assert!(coarse < 1e-2, "n={n} p={p}: {coarse}");
            assert!(fine < coarse / 3.0, "n={n} p={p}: {coarse} -> {fine}");
        }
    }
}
