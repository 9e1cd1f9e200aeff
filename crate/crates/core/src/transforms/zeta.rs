//! Rescaled dual profile `zeta = u / r` in the variable `s = r^{sigma/2}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::params::FlowParams;

use super::legendre::nonuniform;
use super::{LegendreField, Residual};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledProfile {
    pub thetas: Vec<f64>,
    /// Increasing, strictly positive.
    pub s: Vec<f64>,
    /// `values[k * s.len() + j]`.
    pub values: Vec<f64>,
    pub time: f64,
    pub radial: bool,
    pub n: usize,
    pub sigma_p: f64,
}

impl RescaledProfile {
    pub fn at(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.s.len() + j]
    }

    fn theta_step(&self) -> f64 {
        2.0 * PI / self.thetas.len() as f64
    }

    /// Entries `(M11, M12, M22)` of the rescaled Monge-Ampere matrix at an
    /// interior `s` node.
    pub fn matrix(&self, k: usize, j: usize) -> Option<[f64; 3]> {
        let s = &self.s;
        if j == 0 || j + 1 >= s.len() {
            return None;
        }
        let sigma = self.sigma_p;
        let (h_m, h_p) = (s[j] - s[j - 1], s[j + 1] - s[j]);
        let z = |kk: usize, jj: usize| self.at(kk, jj);
        let (z_s, z_ss) = nonuniform(z(k, j - 1), z(k, j), z(k, j + 1), h_m, h_p);
        let m11 = z_ss + (2.0 + sigma) / sigma * z_s / s[j];
        let mut m22 = z(k, j) + 0.5 * sigma * s[j] * z_s;
        let mut m12 = 0.0;
        if !self.radial {
            let m = self.thetas.len();
            let (kp, km) = ((k + 1) % m, (k + m - 1) % m);
            let ht = self.theta_step();
            m22 += (z(kp, j) - 2.0 * z(k, j) + z(km, j)) / (ht * ht);
            let zt = |jj: usize| (z(kp, jj) - z(km, jj)) / (2.0 * ht);
            m12 = nonuniform(zt(j - 1), zt(j), zt(j + 1), h_m, h_p).0;
        }
        Some([m11, m12, m22])
    }

    /// `det M`, with the tangential entry repeated `n - 1` times for radial data.
    pub fn det(&self, k: usize, j: usize) -> Option<f64> {
        let [m11, m12, m22] = self.matrix(k, j)?;
        Some(if self.radial {
            m11 * m22.powi(self.n as i32 - 1)
        } else {
            m11 * m22 - m12 * m12
        })
    }
}

/// `4^p sigma^{-2p} (1 + s^{4/sigma})^{-a}`.
pub fn fbar(s: f64, params: &FlowParams) -> f64 {
    let sigma = params.sigma_p;
    4f64.powf(params.p)
        * sigma.powf(-2.0 * params.p)
        * (1.0 + s.powf(4.0 / sigma)).powf(-params.gradient_exponent())
}

/// Every node of `ufield` with `r > 0` becomes a node at `s = r^{sigma/2}`.
pub fn rescaled_zeta(ufield: &LegendreField, params: &FlowParams) -> Result<RescaledProfile> {
    let sigma = params.require_sigma_positive()?;
    if !ufield.radial && ufield.n != 2 {
        return Err(FlowError::Unsupported(
            "angular zeta profiles require n = 2".into(),
        ));
    }
    let first = ufield
        .grid
        .radii
        .iter()
        .position(|&r| r > 0.0)
        .unwrap_or(ufield.grid.n_r());
    if ufield.grid.n_r() - first < 3 {
        return Err(FlowError::invalid("need at least 3 positive radii"));
    }
    let radii = &ufield.grid.radii[first..];
    let s: Vec<f64> = radii.iter().map(|r| r.powf(0.5 * sigma)).collect();
    let mut values = Vec::with_capacity(ufield.grid.n_theta() * s.len());
    for k in 0..ufield.grid.n_theta() {
        let ray = &ufield.ray(k)[first..];
        values.extend(ray.iter().zip(radii).map(|(u, r)| u / r));
    }
    Ok(RescaledProfile {
        thetas: ufield.grid.thetas.clone(),
        s,
        values,
        time: ufield.time,
        radial: ufield.radial,
        n: ufield.n,
        sigma_p: sigma,
    })
}

/// `zeta_t = -Fbar(s) / det(M)^p` on nodes with `s` in `[s_min, s_max]` and `det M > 0`.
pub fn zeta_rhs(
    z: &RescaledProfile,
    params: &FlowParams,
    s_min: f64,
    s_max: f64,
) -> Vec<Option<f64>> {
    let m = z.s.len();
    (0..z.values.len())
        .map(|idx| {
            let (k, j) = (idx / m, idx % m);
            let s = z.s[j];
            if !(s > s_min && s <= s_max) {
                return None;
            }
            let det = z.det(k, j)?;
            (det > 0.0).then(|| -fbar(s, params) / det.powf(params.p))
        })
        .collect()
}

/// `zeta_t - zeta_rhs(zeta)`; nodes outside `(s_min, s_max]` or with a singular matrix are skipped.
pub fn residual_zeta(
    z: &RescaledProfile,
    zeta_t: &[f64],
    params: &FlowParams,
    s_min: f64,
    s_max: f64,
) -> Result<Residual> {
    if !(s_min > 0.0) {
        return Err(FlowError::invalid(format!(
            "s_min {s_min} must be positive"
        )));
    }
    if zeta_t.len() != z.values.len() {
        return Err(FlowError::invalid("zeta_t and the profile differ in size"));
    }
    let rhs = zeta_rhs(z, params, s_min, s_max);
    Ok(Residual::collect(
        rhs.into_iter()
            .enumerate()
            .map(|(k, f)| f.map(|f| (k, zeta_t[k] - f))),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;
    use crate::transforms::PolarGrid;
    use approx::assert_abs_diff_eq;

    fn field(grid: PolarGrid, radial: bool, u: impl Fn(f64, f64) -> f64) -> LegendreField {
        let mut values = Vec::new();
        for k in 0..grid.n_theta() {
            for j in 0..grid.n_r() {
                values.push(u(grid.thetas[k], grid.radii[j]));
            }
        }
        LegendreField {
            grid,
            values,
            center_mass: 0.0,
            time: 0.0,
            radial,
            n: 2,
        }
    }

    #[test]
    fn cone_gives_unit_profile() {
        let p = derive_exponents(2, 1.0).unwrap();
        let u = field(PolarGrid::uniform(3, 11, 1.0).unwrap(), true, |_, r| r);
        let z = rescaled_zeta(&u, &p).unwrap();
        assert!(z.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert_eq!(z.s.len(), 10);
    }

    #[test]
    fn fbar_at_origin() {
        assert_eq!(fbar(0.0, &derive_exponents(2, 1.0).unwrap()), 4.0);
    }

    #[test]
    fn matrix_matches_the_polar_hessian() {
        // det D^2 u = (sigma^2/4) s^2 r^{-n} det M for radial u
        let p = derive_exponents(2, 1.5).unwrap();
        let sigma = p.sigma_p;
        let grid = PolarGrid::for_zeta(1, 0.2, 0.9, 801, sigma).unwrap();
        let u = field(grid, true, |_, r| r + 0.3 * r * r + r.powi(3));
        let z = rescaled_zeta(&u, &p).unwrap();
        let j = 400;
        let (s, r) = (z.s[j], u.grid.radii[j + 0]);
        let u_rr = 0.6 + 6.0 * r;
        let u_r = 1.0 + 0.6 * r + 3.0 * r * r;
        let exact = u_rr * u_r / r;
        let via_m = 0.25 * sigma * sigma * s * s / (r * r) * z.det(0, j).unwrap();
        assert_abs_diff_eq!(via_m / exact, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn self_consistent_residual_is_zero() {
        let p = derive_exponents(2, 1.0).unwrap();
        let grid = PolarGrid::for_zeta(8, 0.1, 1.0, 40, p.sigma_p).unwrap();
        let u = field(grid, false, |t, r| r * (1.0 + 0.1 * t.cos()) + r * r);
        let z = rescaled_zeta(&u, &p).unwrap();
        let rhs = zeta_rhs(&z, &p, 0.3, 0.9);
        let zt: Vec<f64> = rhs.iter().map(|f| f.unwrap_or(0.0)).collect();
        let res = residual_zeta(&z, &zt, &p, 0.3, 0.9).unwrap();
        assert_eq!(res.sup, 0.0);
        assert!(res.evaluated > 0);
    }
}
