//! Closed-form shrinking sphere: `R' = -R^{-np}`, so
//! `R(t) = (R0^{np+1} - (np+1) t)^{1/(np+1)}`.

use crate::error::{FlowError, Result};
use crate::params::FlowParams;

use super::RadialProfile;

pub fn sphere_extinction_time(params: &FlowParams, r0: f64) -> f64 {
    let k = params.n as f64 * params.p + 1.0;
    r0.powf(k) / k
}

pub fn sphere_exact_radius(params: &FlowParams, r0: f64, t: f64) -> Result<f64> {
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(FlowError::invalid(format!(
            "initial radius {r0} must be positive"
        )));
    }
    if !(t >= 0.0) {
        return Err(FlowError::invalid(format!("time {t} must be >= 0")));
    }
    let k = params.n as f64 * params.p + 1.0;
    let extinction = r0.powf(k) / k;
    if t > extinction {
        return Err(FlowError::PastExtinction { t, extinction });
    }
    Ok((r0.powf(k) - k * t).max(0.0).powf(1.0 / k))
}

/// Lower cap of the sphere of radius `radius` centred at height `r0`, so the
/// apex sits at `r0 - radius` (zero at `t = 0`).
pub fn sphere_cap_profile(
    r0: f64,
    radius: f64,
    rho_max: f64,
    len: usize,
    time: f64,
) -> Result<RadialProfile> {
    if !(rho_max < radius) {
        return Err(FlowError::invalid(format!(
            "cap grid radius {rho_max} must stay below the sphere radius {radius}"
        )));
    }
    RadialProfile::from_fn(rho_max, len, time, |rho| {
        r0 - (radius * radius - rho * rho).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_examples() {
        let p = derive_exponents(2, 1.0).unwrap();
        assert_eq!(sphere_exact_radius(&p, 1.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            sphere_exact_radius(&p, 1.0, 1.0 / 3.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            sphere_exact_radius(&p, 1.0, 0.1).unwrap(),
            0.887904,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            sphere_exact_radius(&p, 1.0, 0.1).unwrap(),
            0.7f64.cbrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn past_extinction_reports_time() {
        let p = derive_exponents(2, 1.0).unwrap();
        match sphere_exact_radius(&p, 1.0, 0.5) {
            Err(FlowError::PastExtinction { extinction, .. }) => {
                assert_abs_diff_eq!(extinction, 1.0 / 3.0)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn radius_solves_the_ode() {
        let p = derive_exponents(3, 0.8).unwrap();
        let (t, h) = (0.05, 1e-6);
        let r = |t| sphere_exact_radius(&p, 1.2, t).unwrap();
        let deriv = (r(t + h) - r(t - h)) / (2.0 * h);
        assert_abs_diff_eq!(deriv, -r(t).powf(-(p.n as f64) * p.p), epsilon = 1e-7);
    }
}
