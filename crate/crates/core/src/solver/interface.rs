//! Flat-side tracking: the level set `{v = eps}` and the volume of `{v < eps}`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

use super::{GraphGrid, RadialProfile, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceState {
    pub time: f64,
    /// Volume of the flat part (`c_t`).
    pub flat_volume: f64,
    /// Ordered closed polyline on 2-D grids; empty for radial profiles.
    pub contour: Vec<[f64; 2]>,
    /// Radius of the largest origin-centred ball inside the flat set.
    pub inner_radius: f64,
    /// Radius of the smallest origin-centred ball containing it.
    pub outer_radius: f64,
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_n = pi^{n/2} / Gamma(n/2 + 1), via omega_n = 2 pi / n * omega_{n-2}
    let (mut w, mut k) = if n % 2 == 0 { (1.0, 0) } else { (2.0, 1) };
    while k < n {
        k += 2;
        w *= 2.0 * std::f64::consts::PI / k as f64;
    }
    w
}

pub fn extract_interface(state: &State, n: usize, eps_int: f64) -> Result<InterfaceState> {
    if !(eps_int > 0.0) {
        return Err(FlowError::invalid(format!(
            "interface threshold {eps_int} must be positive"
        )));
    }
    Ok(match state {
        State::Radial(r) => radial_interface(r, n, eps_int),
        State::Graph(g) => graph_interface(g, eps_int),
    })
}

/// Flat volume alone; avoids building the contour.
pub(crate) fn flat_volume(state: &State, n: usize, eps: f64) -> f64 {
    match state {
        State::Radial(r) => radial_interface(r, n, eps).flat_volume,
        State::Graph(g) => {
            let h = g.step;
            let mut area = 0.0;
            for j in 0..g.ny - 1 {
                for i in 0..g.nx - 1 {
                    let values = [
                        g.at(i, j),
                        g.at(i + 1, j),
                        g.at(i + 1, j + 1),
                        g.at(i, j + 1),
                    ];
                    area += match values.iter().filter(|&&v| v < eps).count() {
                        4 => h * h,
                        0 => 0.0,
                        _ => {
                            let corners = [
                                g.point(i, j),
                                g.point(i + 1, j),
                                g.point(i + 1, j + 1),
                                g.point(i, j + 1),
                            ];
                            cell_area_below(corners, values, eps)
                        }
                    };
                }
            }
            area
        }
    }
}

fn radial_interface(r: &RadialProfile, n: usize, eps: f64) -> InterfaceState {
    let v = &r.values;
    let radius = match v.iter().position(|&x| x >= eps) {
        Some(0) => 0.0,
        Some(i) => r.rho(i - 1) + (eps - v[i - 1]) / (v[i] - v[i - 1]) * r.step,
        None => r.rho_max(),
    };
    InterfaceState {
        time: r.time,
        flat_volume: unit_ball_volume(n) * radius.powi(n as i32),
        contour: Vec::new(),
        inner_radius: radius,
        outer_radius: radius,
    }
}

/// Area of the part of a grid cell where the bilinear field is below `eps`,
/// approximated by the polygon through sub-threshold corners and the edge
/// crossings found by linear interpolation.
fn cell_area_below(corners: [[f64; 2]; 4], values: [f64; 4], eps: f64) -> f64 {
    let mut poly: Vec<[f64; 2]> = Vec::with_capacity(8);
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let (va, vb) = (values[k], values[(k + 1) % 4]);
        if va < eps {
            poly.push(a);
        }
        if (va < eps) != (vb < eps) {
            let s = (eps - va) / (vb - va);
            poly.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    shoelace(&poly).abs()
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let m = poly.len();
    if m < 3 {
        return 0.0;
    }
    0.5 * (0..m)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % m]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Edge identifier shared by the two cells adjacent to a grid edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

fn graph_interface(g: &GraphGrid, eps: f64) -> InterfaceState {
    let h = g.step;
    let mut area = 0.0;
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    let mut points: HashMap<Edge, [f64; 2]> = HashMap::new();

    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            // counter-clockwise corners: (i,j), (i+1,j), (i+1,j+1), (i,j+1)
            let corners = [
                g.point(i, j),
                g.point(i + 1, j),
                g.point(i + 1, j + 1),
                g.point(i, j + 1),
            ];
            let values = [
                g.at(i, j),
                g.at(i + 1, j),
                g.at(i + 1, j + 1),
                g.at(i, j + 1),
            ];
            let below = values.iter().filter(|&&v| v < eps).count();
            area += match below {
                4 => h * h,
                0 => 0.0,
                _ => cell_area_below(corners, values, eps),
            };
            if below == 0 || below == 4 {
                continue;
            }
            let edges = [
                Edge::H(i, j),
                Edge::V(i + 1, j),
                Edge::H(i, j + 1),
                Edge::V(i, j),
            ];
            let mut crossing = Vec::with_capacity(4);
            for k in 0..4 {
                let (va, vb) = (values[k], values[(k + 1) % 4]);
                if (va < eps) != (vb < eps) {
                    let s = (eps - va) / (vb - va);
                    let (a, b) = (corners[k], corners[(k + 1) % 4]);
                    points
                        .entry(edges[k])
                        .or_insert([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                    crossing.push(edges[k]);
                }
            }
            match crossing.len() {
                2 => segments.push((crossing[0], crossing[1])),
                4 => {
                    // saddle: resolve with the cell-centre average
                    let centre = values.iter().sum::<f64>() / 4.0;
                    if (centre < eps) == (values[0] < eps) {
                        segments.push((crossing[0], crossing[1]));
                        segments.push((crossing[2], crossing[3]));
                    } else {
                        segments.push((crossing[0], crossing[3]));
                        segments.push((crossing[1], crossing[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let contour: Vec<[f64; 2]> = longest_chain(&segments)
        .into_iter()
        .map(|e| points[&e])
        .collect();
    let (inner, outer) = if contour.is_empty() {
        (0.0, 0.0)
    } else {
        contour.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            (lo.min(r), hi.max(r))
        })
    };
    InterfaceState {
        time: g.time,
        flat_volume: area,
        contour,
        inner_radius: inner,
        outer_radius: outer,
    }
}

/// Chains segments sharing edge crossings into polylines; returns the longest.
fn longest_chain(segments: &[(Edge, Edge)]) -> Vec<Edge> {
    let mut adj: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        adj.entry(*a).or_default().push(k);
        adj.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut best: Vec<Edge> = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = segments[start];
        let mut chain = vec![first, cur];
        while let Some(&next) = adj[&cur].iter().find(|&&k| !used[k]) {
            used[next] = true;
            let (a, b) = segments[next];
            cur = if a == cur { b } else { a };
            if cur == first {
                break;
            }
            chain.push(cur);
        }
        if chain.len() > best.len() {
            best = chain;
        }
    }
    best
}
