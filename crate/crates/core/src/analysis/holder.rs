//! Discrete Hölder norms with respect to `mu`, estimated from randomized
//! point pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::{fold_max, map_indexed, Exec};

use super::metric::{mu_unchecked, MuPoint};

pub const DEFAULT_ALPHA: f64 = 0.25;
pub const DEFAULT_PAIRS: usize = 100_000;

/// Value, spatial gradient and Hessian (row-major `n x n`) and time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct MuJet {
    pub u: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub u_t: f64,
}

impl MuJet {
    pub fn zero(n: usize) -> Self {
        Self {
            u: 0.0,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
            u_t: 0.0,
        }
    }

    /// `sum_k w_k J_k`.
    pub fn combine(terms: &[(f64, &MuJet)]) -> MuJet {
        let n = terms.first().map_or(0, |(_, j)| j.grad.len());
        let mut out = MuJet::zero(n);
        for &(w, j) in terms {
            out.u += w * j.u;
            out.u_t += w * j.u_t;
            out.grad
                .iter_mut()
                .zip(&j.grad)
                .for_each(|(a, b)| *a += w * b);
            out.hess
                .iter_mut()
                .zip(&j.hess)
                .for_each(|(a, b)| *a += w * b);
        }
        out
    }
}

/// A function on a half-space cylinder that can report its jet at a point.
pub trait MuField: Sync {
    fn dim(&self) -> usize;
    /// `None` when the point is outside the sampled region.
    fn jet(&self, p: &MuPoint) -> Option<MuJet>;
}

/// `|x'_i| <= half_width`, `x_n` in `x_n_range`, `t` in `t_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuCylinder {
    pub half_width: f64,
    pub x_n_range: [f64; 2],
    pub t_range: [f64; 2],
}

impl MuCylinder {
    pub fn new(half_width: f64, x_n_range: [f64; 2], t_range: [f64; 2]) -> Result<Self> {
        if !(half_width >= 0.0
            && x_n_range[0] >= 0.0
            && x_n_range[0] <= x_n_range[1]
            && t_range[0] <= t_range[1])
        {
            return Err(FlowError::invalid(format!(
                "bad cylinder: half width {half_width}, x_n {x_n_range:?}, t {t_range:?}"
            )));
        }
        Ok(Self {
            half_width,
            x_n_range,
            t_range,
        })
    }

    /// Diameter in `mu`, used to scale pair offsets.
    fn scale(&self, n: usize) -> f64 {
        let tangential = 2.0 * self.half_width * ((n - 1) as f64).sqrt();
        let normal = self.x_n_range[1].sqrt() - self.x_n_range[0].sqrt();
        let time = (self.t_range[1] - self.t_range[0]).sqrt();
        (tangential + normal + time).max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderOptions {
    pub alpha: f64,
    pub pairs: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            pairs: DEFAULT_PAIRS,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderTerm {
    pub name: String,
    pub sup: f64,
    /// Largest sampled `|T(p1) - T(p2)| / mu(p1, p2)^alpha`.
    pub quotient: f64,
}

impl HolderTerm {
    pub fn norm(&self) -> f64 {
        self.sup + self.quotient
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub alpha: f64,
    pub seed: u64,
    pub pairs_requested: usize,
    pub pairs_used: usize,
    /// Pairs with a point the field could not evaluate, or with coincident points.
    pub pairs_skipped: usize,
    pub terms: Vec<HolderTerm>,
    /// Sum of the term norms.
    pub total: f64,
}

impl HolderReport {
    pub fn term(&self, name: &str) -> Option<&HolderTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Names of the weighted terms, 1-based, `n` the normal index.
pub fn term_names(n: usize) -> Vec<String> {
    let mut names = vec!["x_n U_nn".to_string()];
    names.extend((1..n).map(|i| format!("sqrt(x_n) U_n{i}")));
    for i in 1..n {
        for j in 1..n {
            names.push(format!("U_{i}{j}"));
        }
    }
    names.extend((1..=n).map(|i| format!("U_{i}")));
    names.push("U_t".into());
    names.push("U".into());
    names
}

fn term_values(jet: &MuJet, x_n: f64, n: usize) -> Vec<f64> {
    let h = |i: usize, j: usize| jet.hess[i * n + j];
    let nn = n - 1;
    let mut out = vec![x_n * h(nn, nn)];
    out.extend((0..nn).map(|i| x_n.sqrt() * h(nn, i)));
    for i in 0..nn {
        for j in 0..nn {
            out.push(h(i, j));
        }
    }
    out.extend(jet.grad.iter().copied());
    out.push(jet.u_t);
    out.push(jet.u);
    out
}

/// Pair `k` depends only on the first `k` draws, so a longer run extends a
/// shorter one with the same seed.
pub fn sample_pairs(
    cyl: &MuCylinder,
    n: usize,
    pairs: usize,
    seed: u64,
) -> Vec<(MuPoint, MuPoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = cyl.scale(n);
    let [x0, x1] = cyl.x_n_range;
    let [t0, t1] = cyl.t_range;
    let w = cyl.half_width;
    let mut out = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let a = MuPoint {
            x_prime: (0..n - 1).map(|_| rng.gen_range(-w..=w)).collect(),
            x_n: rng.gen_range(x0..=x1),
            t: rng.gen_range(t0..=t1),
        };
        // log-uniform offset size between 1e-4 and 1 cylinder diameters
        let s = scale * 10f64.powf(rng.gen_range(-4.0..=0.0));
        let x_prime = a
            .x_prime
            .iter()
            .map(|&c| (c + s * rng.gen_range(-1.0..=1.0)).clamp(-w, w))
            .collect();
        let root = (a.x_n.sqrt() + s * rng.gen_range(-1.0..=1.0)).clamp(x0.sqrt(), x1.sqrt());
        let t = (a.t + s * s * rng.gen_range(-1.0..=1.0)).clamp(t0, t1);
        let b = MuPoint {
            x_prime,
            x_n: (root * root).clamp(x0, x1),
            t,
        };
        out.push((a, b));
    }
    out
}

/// Sampled `C_mu^{2+alpha}` norm: sup and `mu`-Hölder quotient of each of
/// `x_n U_nn`, `sqrt(x_n) U_ni`, `U_ij`, `U_i`, `U_t`, `U`.
pub fn holder_norm_c2alpha_mu(
    field: &dyn MuField,
    cyl: &MuCylinder,
    opts: &HolderOptions,
) -> Result<HolderReport> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(FlowError::invalid(format!(
            "alpha = {} must lie in (0, 1)",
            opts.alpha
        )));
    }
    let n = field.dim();
    if n < 2 {
        return Err(FlowError::invalid(
            "the half-space needs dimension at least 2",
        ));
    }
    let pairs = sample_pairs(cyl, n, opts.pairs, opts.seed);
    let evaluated = map_indexed(opts.exec, pairs.len(), |k| {
        let (a, b) = &pairs[k];
        let ja = field.jet(a)?;
        let jb = field.jet(b)?;
        let mu = mu_unchecked(a, b);
        (mu > 0.0).then(|| (term_values(&ja, a.x_n, n), term_values(&jb, b.x_n, n), mu))
    });
    let names = term_names(n);
    let used: Vec<_> = evaluated.iter().flatten().collect();
    let terms: Vec<HolderTerm> = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let sup = fold_max(
                used.iter()
                    .flat_map(|(ta, tb, _)| [ta[i].abs(), tb[i].abs()]),
            )
            .unwrap_or(0.0);
            let quotient = fold_max(
                used.iter()
                    .map(|(ta, tb, mu)| (ta[i] - tb[i]).abs() / mu.powf(opts.alpha)),
            )
            .unwrap_or(0.0);
            HolderTerm {
                name,
                sup,
                quotient,
            }
        })
        .collect();
    for t in &terms {
        if !(t.sup.is_finite() && t.quotient.is_finite()) {
            return Err(FlowError::NonFinite {
                location: format!("Hölder term {}", t.name),
                value: t.norm(),
            });
        }
    }
    Ok(HolderReport {
        alpha: opts.alpha,
        seed: opts.seed,
        pairs_requested: opts.pairs,
        pairs_used: used.len(),
        pairs_skipped: pairs.len() - used.len(),
        total: terms.iter().map(HolderTerm::norm).sum(),
        terms,
    })
}

/// Finite-difference steps used to differentiate a field's jets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceSteps {
    pub space: f64,
    pub time: f64,
}

/// `D_x^gamma D_t^s U`, by differencing the jets of `U`.
pub struct DerivedField<'a> {
    base: &'a dyn MuField,
    /// Spatial axes then `None` for each time derivative.
    ops: Vec<Option<usize>>,
    steps: DifferenceSteps,
}

impl<'a> DerivedField<'a> {
    pub fn new(base: &'a dyn MuField, gamma: &[u32], s: u32, steps: DifferenceSteps) -> Self {
        let mut ops: Vec<Option<usize>> = Vec::new();
        for (axis, &k) in gamma.iter().enumerate() {
            ops.extend(std::iter::repeat(Some(axis)).take(k as usize));
        }
        ops.extend(std::iter::repeat(None).take(s as usize));
        Self { base, ops, steps }
    }

    fn eval(&self, ops: &[Option<usize>], p: &MuPoint) -> Option<MuJet> {
        let Some((&op, rest)) = ops.split_first() else {
            return self.base.jet(p);
        };
        match op {
            Some(axis) => {
                let h = self.steps.space;
                if axis + 1 == p.dim() && p.x_n < h {
                    let f0 = self.eval(rest, p)?;
                    let f1 = self.eval(rest, &p.shifted(axis, h))?;
                    let f2 = self.eval(rest, &p.shifted(axis, 2.0 * h))?;
                    let w = 0.5 / h;
                    return Some(MuJet::combine(&[
                        (-3.0 * w, &f0),
                        (4.0 * w, &f1),
                        (-w, &f2),
                    ]));
                }
                let fp = self.eval(rest, &p.shifted(axis, h))?;
                let fm = self.eval(rest, &p.shifted(axis, -h))?;
                Some(MuJet::combine(&[(0.5 / h, &fp), (-0.5 / h, &fm)]))
            }
            None => {
                let h = self.steps.time;
                let mut plus = p.clone();
                plus.t += h;
                let mut minus = p.clone();
                minus.t -= h;
                let fp = self.eval(rest, &plus)?;
                let fm = self.eval(rest, &minus)?;
                Some(MuJet::combine(&[(0.5 / h, &fp), (-0.5 / h, &fm)]))
            }
        }
    }
}

impl MuField for DerivedField<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn jet(&self, p: &MuPoint) -> Option<MuJet> {
        self.eval(&self.ops, p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherComponent {
    pub gamma: Vec<u32>,
    pub s: u32,
    pub report: HolderReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherHolderReport {
    pub m: u32,
    pub components: Vec<HigherComponent>,
    pub total: f64,
}

fn multi_indices(n: usize, max: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..=max {
        for mut rest in multi_indices(n - 1, max - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `C_mu^{m, 2+alpha}`: the `C_mu^{2+alpha}` report of every `D_x^gamma D_t^s U`
/// with `|gamma| + 2s <= m`, all on the same sampled pairs.
pub fn holder_norm_higher(
    field: &dyn MuField,
    m: u32,
    cyl: &MuCylinder,
    opts: &HolderOptions,
    steps: DifferenceSteps,
) -> Result<HigherHolderReport> {
    let n = field.dim();
    let mut components = Vec::new();
    for s in 0..=m / 2 {
        for gamma in multi_indices(n, m - 2 * s) {
            let report = if s == 0 && gamma.iter().all(|&g| g == 0) {
                holder_norm_c2alpha_mu(field, cyl, opts)?
            } else {
                holder_norm_c2alpha_mu(&DerivedField::new(field, &gamma, s, steps), cyl, opts)?
            };
            components.push(HigherComponent { gamma, s, report });
        }
    }
    let total = components.iter().map(|c| c.report.total).sum();
    Ok(HigherHolderReport {
        m,
        components,
        total,
    })
}

/// A closed-form field, for tests and oracles.
pub struct FnField<F> {
    pub n: usize,
    pub f: F,
}

impl<F> MuField for FnField<F>
where
    F: Fn(&MuPoint) -> Option<MuJet> + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, p: &MuPoint) -> Option<MuJet> {
        (self.f)(p)
    }
}
