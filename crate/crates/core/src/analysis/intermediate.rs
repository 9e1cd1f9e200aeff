//! Weighted Hölder statistic of the top derivatives of `v` near the interface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::par::{fold_max, map_indexed, Exec};
use crate::params::{classify_v_regularity, FlowParams};
use crate::solver::{extract_interface, GraphGrid, RadialProfile, State, DEFAULT_EPS_INT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediateOptions {
    /// Pair budget per evaluation; below it every pair is visited.
    pub pairs: usize,
    pub seed: u64,
    /// Open band `{band[0] < v < band[1]}`.
    pub band: [f64; 2],
}

impl Default for IntermediateOptions {
    fn default() -> Self {
        Self {
            pairs: 100_000,
            seed: 0,
            band: [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediateEstimate {
    pub sup: f64,
    pub k0: u32,
    /// `k0 + 2`.
    pub order: u32,
    /// `2/sigma_p - k0`.
    pub holder_exponent: f64,
    /// `1 + 1/sigma_p`.
    pub weight_exponent: f64,
    pub pairs_used: usize,
    pub slices_used: usize,
    pub exhaustive: bool,
}

/// Centered difference weights for the `k`-th derivative on unit spacing:
/// `D0` once if `k` is odd, then `D+D-` repeatedly.
pub fn derivative_stencil(k: u32) -> Vec<f64> {
    let conv = |a: &[f64], b: &[f64]| {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    let mut s = vec![1.0];
    if k % 2 == 1 {
        s = conv(&s, &[-0.5, 0.0, 0.5]);
    }
    for _ in 0..k / 2 {
        s = conv(&s, &[1.0, -2.0, 1.0]);
    }
    s
}

struct BandPoint {
    y: [f64; 2],
    dist: f64,
    deriv: Vec<f64>,
}

fn radial_points(r: &RadialProfile, n: usize, k: u32, band: [f64; 2]) -> Result<Vec<BandPoint>> {
    let st = derivative_stencil(k);
    let w = st.len() / 2;
    let rho_i = extract_interface(&State::Radial(r.clone()), n, DEFAULT_EPS_INT)?.outer_radius;
    let scale = r.step.powi(k as i32);
    let v = &r.values;
    Ok((w..v.len().saturating_sub(w))
        .filter(|&i| v[i] > band[0] && v[i] < band[1])
        .map(|i| {
            let d: f64 = st.iter().enumerate().map(|(m, c)| c * v[i + m - w]).sum();
            BandPoint {
                y: [r.rho(i), 0.0],
                dist: (r.rho(i) - rho_i).max(0.0),
                deriv: vec![d / scale],
            }
        })
        .collect())
}

fn graph_points(g: &GraphGrid, k: u32, band: [f64; 2]) -> Result<Vec<BandPoint>> {
    let stencils: Vec<Vec<f64>> = (0..=k).map(derivative_stencil).collect();
    let w = stencils[k as usize].len() / 2;
    let contour = extract_interface(&State::Graph(g.clone()), 2, DEFAULT_EPS_INT)?.contour;
    let scale = g.step.powi(k as i32);
    // without an interface every band point is a grid diameter away from it
    let far = g.step * (g.nx.max(g.ny) as f64) * std::f64::consts::SQRT_2;
    let nodes: Vec<(usize, usize)> = (w..g.ny.saturating_sub(w))
        .flat_map(|j| (w..g.nx.saturating_sub(w)).map(move |i| (i, j)))
        .filter(|&(i, j)| g.at(i, j) > band[0] && g.at(i, j) < band[1])
        .collect();
    Ok(map_indexed(Exec::default(), nodes.len(), |idx| {
        let (i, j) = nodes[idx];
        let deriv = (0..=k as usize)
            .map(|a| {
                let (sx, sy) = (&stencils[a], &stencils[k as usize - a]);
                let (wx, wy) = (sx.len() / 2, sy.len() / 2);
                let mut acc = 0.0;
                for (q, cy) in sy.iter().enumerate() {
                    for (p, cx) in sx.iter().enumerate() {
                        acc += cx * cy * g.at(i + p - wx, j + q - wy);
                    }
                }
                acc / scale
            })
            .collect();
        let y = g.point(i, j);
        BandPoint {
            y,
            dist: contour_distance(&contour, y).min(far),
            deriv,
        }
    }))
}

fn contour_distance(pts: &[[f64; 2]], y: [f64; 2]) -> f64 {
    let m = pts.len();
    (0..m)
        .map(|s| {
            let (a, b) = (pts[s], pts[(s + 1) % m]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((y[0] - a[0]) * dx + (y[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (y[0] - a[0] - t * dx).hypot(y[1] - a[1] - t * dy)
        })
        .fold(f64::INFINITY, f64::min)
}

fn pair_value(a: &BandPoint, b: &BandPoint, weight: f64, holder: f64) -> f64 {
    let diff = a
        .deriv
        .iter()
        .zip(&b.deriv)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if diff == 0.0 {
        return 0.0;
    }
    let sep = (a.y[0] - b.y[0]).hypot(a.y[1] - b.y[1]);
    a.dist.min(b.dist).powf(weight) * diff / sep.powf(holder)
}

/// `sup d^{1+1/sigma} |D^{k0+2} v(y) - D^{k0+2} v(y~)| / |y - y~|^{2/sigma - k0}`
/// over snapshots with time in `window` and point pairs in the band, `d` the
/// smaller of the two distances to the interface.
pub fn intermediate_estimate_sup(
    trajectory: &[State],
    params: &FlowParams,
    window: [f64; 2],
    opts: &IntermediateOptions,
) -> Result<IntermediateEstimate> {
    let sigma = params.require_sigma_positive()?;
    let k0 = classify_v_regularity(params)?.k0;
    let k = k0 + 2;
    let weight = 1.0 + 1.0 / sigma;
    let holder = 2.0 / sigma - k0 as f64;
    let mut slices = Vec::new();
    for s in trajectory
        .iter()
        .filter(|s| s.time() >= window[0] && s.time() <= window[1])
    {
        let pts = match s {
            State::Radial(r) => radial_points(r, params.n, k, opts.band)?,
            State::Graph(g) => graph_points(g, k, opts.band)?,
        };
        if pts.len() >= 2 {
            slices.push(pts);
        }
    }
    let total: usize = slices.iter().map(|p| p.len() * (p.len() - 1) / 2).sum();
    if total == 0 {
        return Err(FlowError::InsufficientSamples {
            usable: slices.iter().map(Vec::len).sum(),
            required: 2,
        });
    }
    let exhaustive = total <= opts.pairs;
    let pairs: Vec<(usize, usize, usize)> = if exhaustive {
        slices
            .iter()
            .enumerate()
            .flat_map(|(s, p)| {
                (0..p.len()).flat_map(move |a| (a + 1..p.len()).map(move |b| (s, a, b)))
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        (0..opts.pairs)
            .map(|_| {
                let s = rng.gen_range(0..slices.len());
                let m = slices[s].len();
                let a = rng.gen_range(0..m);
                // half the pairs are close neighbours in band order
                let b = if rng.gen_bool(0.5) {
                    let off = rng.gen_range(1..=8.min(m - 1));
                    if a + off < m {
                        a + off
                    } else {
                        a - off.min(a)
                    }
                } else {
                    rng.gen_range(0..m)
                };
                (s, a, b)
            })
            .filter(|&(_, a, b)| a != b)
            .collect()
    };
    let values = map_indexed(Exec::default(), pairs.len(), |i| {
        let (s, a, b) = pairs[i];
        pair_value(&slices[s][a], &slices[s][b], weight, holder)
    });
    let sup = fold_max(values.iter().copied()).unwrap_or(0.0);
    if !sup.is_finite() {
        return Err(FlowError::NonFinite {
            location: "intermediate estimate".into(),
            value: sup,
        });
    }
    Ok(IntermediateEstimate {
        sup,
        k0,
        order: k,
        holder_exponent: holder,
        weight_exponent: weight,
        pairs_used: pairs.len(),
        slices_used: slices.len(),
        exhaustive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;

    #[test]
    fn stencils_differentiate_monomials() {
        for k in 1..=5u32 {
            let st = derivative_stencil(k);
            let w = st.len() as i32 / 2;
            let kth: f64 = st
                .iter()
                .enumerate()
                .map(|(m, c)| c * ((m as i32 - w) as f64).powi(k as i32))
                .sum();
            let fact: f64 = (1..=k).map(|x| x as f64).product();
            assert!((kth - fact).abs() < 1e-9, "k={k}");
            let lower: f64 = st
                .iter()
                .enumerate()
                .map(|(m, c)| c * ((m as i32 - w) as f64).powi(k as i32 - 1))
                .sum();
            assert!(lower.abs() < 1e-9);
        }
    }

    #[test]
    fn constant_and_low_degree_fields_give_zero() {
        let p = derive_exponents(2, 1.0).unwrap();
        let flat = State::Radial(RadialProfile::from_fn(2.0, 201, 0.0, |_| 0.5).unwrap());
        let e = intermediate_estimate_sup(&[flat], &p, [0.0, 1.0], &IntermediateOptions::default())
            .unwrap();
        assert_eq!(e.sup, 0.0);
        assert_eq!((e.k0, e.order), (1, 3));
        let quad = State::Graph(
            GraphGrid::from_fn(1.0, 41, 0.0, |y| {
                0.1 + 0.2 * y[0] * y[0] + 0.1 * y[0] * y[1]
            })
            .unwrap(),
        );
        let e = intermediate_estimate_sup(&[quad], &p, [0.0, 1.0], &IntermediateOptions::default())
            .unwrap();
        assert!(e.sup < 1e-8, "{}", e.sup);
    }

    #[test]
    fn empty_band_faults() {
        let p = derive_exponents(2, 1.0).unwrap();
        let high = State::Radial(RadialProfile::from_fn(2.0, 201, 0.0, |_| 5.0).unwrap());
        assert!(intermediate_estimate_sup(
            &[high],
            &p,
            [0.0, 1.0],
            &IntermediateOptions::default()
        )
        .is_err());
    }
}
