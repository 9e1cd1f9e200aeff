//! Flow parameters, the derived exponent `sigma_p = n - 1/p`, and the
//! closed-form regularity classifiers for the pressure `g` and the height `v`.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

/// Tolerance on `|x - round(x)|` when deciding whether `2/sigma_p` or
/// `1/sigma_p` is an integer. `p` usually arrives as a decimal string.
pub const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub n: usize,
    pub p: f64,
    pub sigma_p: f64,
    pub t_horizon: f64,
}

impl FlowParams {
    /// Validates `n >= 2`, finite `p > 0` and computes `sigma_p`.
    ///
    /// With `flat_side = true` the regime `p <= 1/n` is rejected, since every
    /// pressure-side exponent divides by `sigma_p`.
    pub fn derive(n: usize, p: f64, flat_side: bool) -> Result<Self> {
        if n < 2 {
            return Err(FlowError::invalid(format!(
                "dimension n = {n} must be at least 2"
            )));
        }
        if !p.is_finite() || p <= 0.0 {
            return Err(FlowError::invalid(format!(
                "power p = {p} must be finite and positive"
            )));
        }
        let sigma_p = n as f64 - 1.0 / p;
        if flat_side && sigma_p <= INTEGRALITY_TOL {
            return Err(FlowError::domain(format!(
                "p = {p} <= 1/n = {} gives sigma_p = {sigma_p}; the flat side does not persist",
                1.0 / n as f64
            )));
        }
        Ok(Self {
            n,
            p,
            sigma_p,
            t_horizon: 0.0,
        })
    }

    pub fn with_horizon(mut self, t_horizon: f64) -> Result<Self> {
        if !t_horizon.is_finite() || t_horizon < 0.0 {
            return Err(FlowError::invalid(format!(
                "time horizon {t_horizon} must be >= 0"
            )));
        }
        self.t_horizon = t_horizon;
        Ok(self)
    }

    /// `p > 1/n`, equivalently `sigma_p > 0`.
    pub fn flat_side_persists(&self) -> bool {
        self.sigma_p > 0.0
    }

    /// Exponent `((n+2)p - 1) / 2` of the gradient factor `(1 + |Dv|^2)`.
    pub fn gradient_exponent(&self) -> f64 {
        ((self.n as f64 + 2.0) * self.p - 1.0) / 2.0
    }

    pub(crate) fn require_sigma_positive(&self) -> Result<f64> {
        if self.sigma_p > 0.0 {
            Ok(self.sigma_p)
        } else {
            Err(FlowError::domain(format!(
                "sigma_p = {} must be positive",
                self.sigma_p
            )))
        }
    }
}

/// Free-standing form of [`FlowParams::derive`] in flat-side mode.
pub fn derive_exponents(n: usize, p: f64) -> Result<FlowParams> {
    FlowParams::derive(n, p, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    G,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityClass {
    pub variable: Variable,
    pub smooth: bool,
    /// `k` of `C^{k,.}` (for `v`) or `C_mu^{k, 2+.}` (for `g`). In the smooth
    /// case this is `k0`.
    pub order: u32,
    pub holder_exponent: f64,
    /// Greatest integer strictly less than `2/sigma_p`.
    pub k0: u32,
    /// `min{1, 4/sigma_p - 2[2/sigma_p]}`; `1` when `2/sigma_p` is an integer.
    pub beta0: f64,
}

fn positive_integer(x: f64) -> Option<u32> {
    let r = x.round();
    (r >= 1.0 && (x - r).abs() <= INTEGRALITY_TOL).then_some(r as u32)
}

/// Greatest integer strictly less than `x`, with integrality decided by [`INTEGRALITY_TOL`].
pub fn floor_strict(x: f64) -> i64 {
    let r = x.round();
    if (x - r).abs() <= INTEGRALITY_TOL {
        r as i64 - 1
    } else {
        x.floor() as i64
    }
}

fn k0_beta0(sigma_p: f64) -> (u32, f64) {
    let two_over = 2.0 / sigma_p;
    let k0 = floor_strict(two_over).max(0) as u32;
    let beta0 = match positive_integer(two_over) {
        Some(_) => 1.0,
        None => (2.0 * two_over - 2.0 * two_over.floor()).min(1.0),
    };
    (k0, beta0)
}

pub fn classify_g_regularity(params: &FlowParams) -> Result<RegularityClass> {
    params.require_sigma_positive()?;
    let two_over = 2.0 / params.sigma_p;
    let (k0, beta0) = k0_beta0(params.sigma_p);
    Ok(match positive_integer(two_over) {
        Some(_) => RegularityClass {
            variable: Variable::G,
            smooth: true,
            order: k0,
            holder_exponent: 1.0,
            k0,
            beta0,
        },
        None => RegularityClass {
            variable: Variable::G,
            smooth: false,
            order: two_over.floor() as u32,
            holder_exponent: beta0,
            k0,
            beta0,
        },
    })
}

pub fn classify_v_regularity(params: &FlowParams) -> Result<RegularityClass> {
    params.require_sigma_positive()?;
    let one_over = 1.0 / params.sigma_p;
    let (k0, beta0) = k0_beta0(params.sigma_p);
    Ok(match positive_integer(one_over) {
        Some(_) => RegularityClass {
            variable: Variable::V,
            smooth: true,
            order: k0,
            holder_exponent: 1.0,
            k0,
            beta0,
        },
        None => RegularityClass {
            variable: Variable::V,
            smooth: false,
            order: 1 + one_over.floor() as u32,
            holder_exponent: one_over - one_over.floor(),
            k0,
            beta0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigma_examples() {
        let a = derive_exponents(2, 1.0).unwrap();
        assert_eq!(a.sigma_p, 1.0);
        assert!(a.flat_side_persists());
        assert_eq!(derive_exponents(3, 1.0).unwrap().sigma_p, 2.0);
        assert!(matches!(
            derive_exponents(2, 0.5),
            Err(FlowError::Domain(_))
        ));
        // Outside flat-side mode the boundary case is representable.
        assert_eq!(FlowParams::derive(2, 0.5, false).unwrap().sigma_p, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FlowParams::derive(1, 1.0, false).is_err());
        assert!(FlowParams::derive(2, f64::NAN, false).is_err());
        assert!(FlowParams::derive(2, f64::INFINITY, false).is_err());
        assert!(FlowParams::derive(2, -1.0, false).is_err());
        assert!(derive_exponents(3, 1.0 / 3.0).is_err());
        assert!(derive_exponents(2, 0.4).is_err());
    }

    #[test]
    fn g_classes() {
        let g = classify_g_regularity(&derive_exponents(2, 1.0).unwrap()).unwrap();
        assert!(g.smooth);
        let g = classify_g_regularity(&derive_exponents(2, 2.0).unwrap()).unwrap();
        assert!(!g.smooth);
        assert_eq!(g.order, 1);
        assert_abs_diff_eq!(g.beta0, 2.0 / 3.0, epsilon = 1e-12);
        assert!(
            classify_g_regularity(&derive_exponents(3, 1.0).unwrap())
                .unwrap()
                .smooth
        );
    }

    #[test]
    fn v_classes_and_split() {
        assert!(
            classify_v_regularity(&derive_exponents(2, 1.0).unwrap())
                .unwrap()
                .smooth
        );
        let v = classify_v_regularity(&derive_exponents(2, 2.0).unwrap()).unwrap();
        assert_eq!((v.smooth, v.order), (false, 1));
        assert_abs_diff_eq!(v.holder_exponent, 2.0 / 3.0, epsilon = 1e-12);

        let params = derive_exponents(2, 0.75).unwrap();
        assert!(classify_g_regularity(&params).unwrap().smooth);
        let v = classify_v_regularity(&params).unwrap();
        assert_eq!((v.smooth, v.order), (false, 2));
        assert_abs_diff_eq!(v.holder_exponent, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn k0_is_strict() {
        // 2/sigma = 2 -> k0 = 1; 2/sigma = 4/3 -> k0 = 1; 2/sigma = 0.8 -> k0 = 0
        assert_eq!(
            classify_g_regularity(&derive_exponents(2, 1.0).unwrap())
                .unwrap()
                .k0,
            1
        );
        assert_eq!(
            classify_g_regularity(&derive_exponents(2, 2.0).unwrap())
                .unwrap()
                .k0,
            1
        );
        assert_eq!(
            classify_g_regularity(&derive_exponents(3, 2.0).unwrap())
                .unwrap()
                .k0,
            0
        );
    }

    #[test]
    fn non_positive_sigma_is_domain_error() {
        let params = FlowParams::derive(2, 0.4, false).unwrap();
        assert!(classify_g_regularity(&params).is_err());
        assert!(classify_v_regularity(&params).is_err());
    }
}
