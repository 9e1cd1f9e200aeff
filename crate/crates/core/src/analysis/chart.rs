//! Half-space charts of a sampled field near its zero level set.

use crate::error::{FlowError, Result};
use crate::transforms::{frame_from_normal, FieldSampler, RadialSampler};

use super::holder::{MuField, MuJet};
use super::metric::MuPoint;

/// One time slice: a sampler and the chart placing `x_n = 0` on its interface.
pub struct ChartSlice<S> {
    pub time: f64,
    pub sampler: S,
    pub anchor: Vec<f64>,
    /// Orthonormal, last vector the interface normal.
    pub frame: Vec<Vec<f64>>,
}

impl<S: FieldSampler> ChartSlice<S> {
    pub fn new(sampler: S, anchor: Vec<f64>, normal: &[f64]) -> Result<Self> {
        if anchor.len() != sampler.dim() || normal.len() != sampler.dim() {
            return Err(FlowError::invalid(
                "anchor and normal must match the sampler dimension",
            ));
        }
        Ok(Self {
            time: sampler.time(),
            frame: frame_from_normal(normal)?,
            sampler,
            anchor,
        })
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        let mut y = self.anchor.clone();
        for (c, e) in x.iter().zip(&self.frame) {
            y.iter_mut().zip(e).for_each(|(yi, ei)| *yi += c * ei);
        }
        self.sampler.value(&y)
    }

    /// Value, gradient and Hessian in chart coordinates by central differences
    /// (one-sided across `x_n = 0`).
    fn spatial_jet(&self, x: &[f64], h: f64) -> Option<MuJet> {
        let n = x.len();
        let at = |shift: &[(usize, f64)]| {
            let mut z = x.to_vec();
            for &(k, d) in shift {
                z[k] += d;
            }
            self.value(&z)
        };
        let nn = n - 1;
        let one_sided = x[nn] < h;
        let f0 = self.value(x)?;
        let mut jet = MuJet {
            u: f0,
            ..MuJet::zero(n)
        };
        for i in 0..n {
            let (d1, d2) = if i == nn && one_sided {
                let (f1, f2, f3) = (at(&[(i, h)])?, at(&[(i, 2.0 * h)])?, at(&[(i, 3.0 * h)])?);
                (
                    (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h),
                    (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h),
                )
            } else {
                let (fp, fm) = (at(&[(i, h)])?, at(&[(i, -h)])?);
                ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
            };
            jet.grad[i] = d1;
            jet.hess[i * n + i] = d2;
        }
        for i in 0..n {
            for j in i + 1..n {
                let m = if j == nn && one_sided {
                    let d = |s: f64| -> Option<f64> {
                        let (g0, g1, g2) = (
                            at(&[(i, s)])?,
                            at(&[(i, s), (j, h)])?,
                            at(&[(i, s), (j, 2.0 * h)])?,
                        );
                        Some((-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * h))
                    };
                    (d(h)? - d(-h)?) / (2.0 * h)
                } else {
                    (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                        + at(&[(i, -h), (j, -h)])?)
                        / (4.0 * h * h)
                };
                jet.hess[i * n + j] = m;
                jet.hess[j * n + i] = m;
            }
        }
        Some(jet)
    }
}

/// `U(x', x_n, t)`: the sampled field in the chart of each slice, Catmull-Rom
/// interpolated between equally spaced slice times. A single slice gives a
/// time-independent field.
pub struct InterfaceChart<S> {
    slices: Vec<ChartSlice<S>>,
    step: f64,
}

impl<S: FieldSampler> InterfaceChart<S> {
    pub fn new(slices: Vec<ChartSlice<S>>, step: f64) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| FlowError::invalid("a chart needs at least one slice"))?;
        let n = first.sampler.dim();
        if n < 2 || slices.iter().any(|s| s.sampler.dim() != n) {
            return Err(FlowError::invalid("slices must share a dimension >= 2"));
        }
        if !(step > 0.0) {
            return Err(FlowError::invalid(format!(
                "difference step {step} must be positive"
            )));
        }
        if slices.len() > 1 {
            let dt = slices[1].time - slices[0].time;
            let uniform = slices
                .windows(2)
                .all(|w| ((w[1].time - w[0].time) - dt).abs() <= 1e-9 * dt.abs().max(1e-12));
            if !(dt > 0.0) || !uniform {
                return Err(FlowError::invalid(
                    "slice times must be increasing and equally spaced",
                ));
            }
        }
        Ok(Self { slices, step })
    }

    pub fn time_range(&self) -> [f64; 2] {
        [self.slices[0].time, self.slices[self.slices.len() - 1].time]
    }

    pub fn slices(&self) -> &[ChartSlice<S>] {
        &self.slices
    }
}

impl InterfaceChart<RadialSampler> {
    /// Charts at the point `rho_I e_n` of the zero level of each radial slice,
    /// normal `e_n`.
    pub fn radial(samplers: Vec<RadialSampler>, step: f64) -> Result<Self> {
        let slices = samplers
            .into_iter()
            .map(|s| {
                let n = s.dim();
                let rho = s
                    .level_radius(0.0)
                    .ok_or_else(|| FlowError::domain("slice has no zero level"))?;
                let mut anchor = vec![0.0; n];
                anchor[n - 1] = rho;
                let mut normal = vec![0.0; n];
                normal[n - 1] = 1.0;
                ChartSlice::new(s, anchor, &normal)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(slices, step)
    }
}

/// Catmull-Rom weights and their `tau`-derivatives for `P_{k-1} .. P_{k+2}`.
fn catmull_rom_weights(tau: f64) -> ([f64; 4], [f64; 4]) {
    let (t2, t3) = (tau * tau, tau * tau * tau);
    (
        [
            0.5 * (-t3 + 2.0 * t2 - tau),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + tau),
            0.5 * (t3 - t2),
        ],
        [
            0.5 * (-3.0 * t2 + 4.0 * tau - 1.0),
            0.5 * (9.0 * t2 - 10.0 * tau),
            0.5 * (-9.0 * t2 + 8.0 * tau + 1.0),
            0.5 * (3.0 * t2 - 2.0 * tau),
        ],
    )
}

impl<S: FieldSampler> MuField for InterfaceChart<S> {
    fn dim(&self) -> usize {
        self.slices[0].sampler.dim()
    }

    fn jet(&self, p: &MuPoint) -> Option<MuJet> {
        let n = self.dim();
        if p.dim() != n || p.x_n < 0.0 {
            return None;
        }
        let mut x = p.x_prime.clone();
        x.push(p.x_n);
        let m = self.slices.len();
        if m == 1 {
            return self.slices[0].spatial_jet(&x, self.step);
        }
        let [t0, t1] = self.time_range();
        if !(p.t >= t0 && p.t <= t1) {
            return None;
        }
        let dt = self.slices[1].time - t0;
        let k = (((p.t - t0) / dt).floor() as usize).min(m - 2);
        let tau = (p.t - t0) / dt - k as f64;
        let jet = |i: usize| self.slices[i].spatial_jet(&x, self.step);
        let (j0, j1) = (jet(k)?, jet(k + 1)?);
        // linear extrapolation supplies the ghost slices at both ends
        let jm = match k {
            0 => MuJet::combine(&[(2.0, &j0), (-1.0, &j1)]),
            _ => jet(k - 1)?,
        };
        let jp = if k + 2 < m {
            jet(k + 2)?
        } else {
            MuJet::combine(&[(2.0, &j1), (-1.0, &j0)])
        };
        let (w, dw) = catmull_rom_weights(tau);
        let mut out = MuJet::combine(&[(w[0], &jm), (w[1], &j0), (w[2], &j1), (w[3], &jp)]);
        out.u_t = (dw[0] * jm.u + dw[1] * j0.u + dw[2] * j1.u + dw[3] * jp.u) / dt;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::RadialProfile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn catmull_rom_partitions_unity() {
        for tau in [0.0, 0.3, 1.0] {
            let (w, dw) = catmull_rom_weights(tau);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dw.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_pressure_in_a_moving_chart() {
        // g = (rho - 1 + t)_+ sampled at three times: chart value is x_n, time derivative 0
        let samplers: Vec<RadialSampler> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&t| {
                let r =
                    RadialProfile::from_fn(2.0, 2001, t, |rho| (rho - 1.0 + t).max(0.0)).unwrap();
                RadialSampler::extended(&r, 2, 1e-6).unwrap()
            })
            .collect();
        let chart = InterfaceChart::radial(samplers, 1e-3).unwrap();
        let p = MuPoint::new(vec![0.0], 0.2, 0.15).unwrap();
        let j = chart.jet(&p).unwrap();
        assert_abs_diff_eq!(j.u, 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(j.grad[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(j.u_t, 0.0, epsilon = 1e-6);
        // tangential curvature of the level circles: U_11 = g'/rho
        let rho = 1.0 - 0.15 + 0.2;
        // slice values interpolated in time, so only to the interpolation error
        assert_abs_diff_eq!(j.hess[0], 1.0 / rho, epsilon = 2e-3);
        assert!(chart
            .jet(&MuPoint::new(vec![0.0], 0.2, 0.25).unwrap())
            .is_none());
    }

    #[test]
    fn one_sided_differences_at_the_boundary() {
        let r = RadialProfile::from_fn(2.0, 4001, 0.0, |rho| {
            (rho - 1.0).max(0.0) + (rho - 1.0).max(0.0).powi(2)
        })
        .unwrap();
        let chart =
            InterfaceChart::radial(vec![RadialSampler::extended(&r, 2, 1e-6).unwrap()], 1e-3)
                .unwrap();
        let j = chart
            .jet(&MuPoint::new(vec![0.0], 0.0, 0.0).unwrap())
            .unwrap();
        assert_abs_diff_eq!(j.grad[1], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(j.hess[3], 2.0, epsilon = 1e-2);
        assert_eq!(j.u_t, 0.0);
    }
}
