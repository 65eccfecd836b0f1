use num_complex::Complex;
use serde::Serialize;

use super::quadrature::gauss_legendre;
use super::{mean_a_exact, reduced_time, stochastic_average_resummed};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Default cutoff radius (in units of the unit Gaussian width of Q₀).
pub const DEFAULT_Q0_RADIUS: f64 = 8.0;

const RADIAL_NODES: usize = 16;
const ANGULAR_POINTS: usize = 256;

/// Whether `∫ d²β Q₀(β) ⟨α(t)⟩_S(β)` exists for the re-summed fixed-`β`
/// average, where `Q₀(β) = e^{−|β−α₀|²}/π`.
///
/// The integrand grows like `exp(−cos(2μt)|β|²)`, so it is unbounded
/// whenever `cos(2μt) ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Q0Integrability<T> {
    Integrable {
        cos_2mu_t: T,
        radius: T,
        quadrature: Complex<T>,
        exact: Complex<T>,
        deviation: T,
    },
    Unbounded {
        cos_2mu_t: T,
    },
}

impl<T> Q0Integrability<T> {
    pub fn is_unbounded(&self) -> bool {
        matches!(self, Q0Integrability::Unbounded { .. })
    }
}

fn cos_2mu_t<T: Real>(mu: T, t: T) -> T {
    let tau = reduced_time(mu, t);
    let arg = T::lit(2.0) * mu * tau;
    let c = arg.cos();
    // cos is evaluated at a rounded argument; treat rounding-level values
    // as the boundary itself.
    if c.abs() <= T::lit(4.0) * T::epsilon() * (T::one() + arg.abs()) {
        T::zero()
    } else {
        c
    }
}

/// Classify `t` and, when integrable, compare the quadrature of the
/// re-summed average over `|β − α₀| ≤ 8` with the exact `⟨â(t)⟩`.
pub fn resummed_q0_integrability<T: Real>(alpha0: Complex<T>, mu: T, t: T) -> Result<Q0Integrability<T>> {
    if !(mu > T::zero()) || !mu.is_finite() {
        return Err(invalid("mu", "must be finite and > 0"));
    }
    let c = cos_2mu_t(mu, t);
    if c <= T::zero() {
        return Ok(Q0Integrability::Unbounded { cos_2mu_t: c });
    }
    let radius = T::lit(DEFAULT_Q0_RADIUS);
    let quadrature = resummed_q0_quadrature(alpha0, mu, t, radius)?;
    let exact = mean_a_exact(alpha0, mu, t);
    Ok(Q0Integrability::Integrable {
        cos_2mu_t: c,
        radius,
        quadrature,
        exact,
        deviation: (quadrature - exact).norm(),
    })
}

/// `∫_{|β−α₀|≤R} d²β e^{−|β−α₀|²}/π · ⟨α(t)⟩_S(β)` in polar coordinates
/// about `α₀`: composite Gauss–Legendre on unit radial panels, periodic
/// trapezoid in angle. Defined for any `t`; only meaningful as `R → ∞` when
/// `cos(2μt) > 0`.
pub fn resummed_q0_quadrature<T: Real>(alpha0: Complex<T>, mu: T, t: T, radius: T) -> Result<Complex<T>> {
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(invalid("radius", "must be finite and > 0"));
    }
    let (x, w) = gauss_legendre::<T>(RADIAL_NODES);
    let panels = radius.ceil().to_usize().unwrap_or(1).max(1);
    let h = radius / T::from_usize_lossy(panels);
    let half = T::lit(0.5) * h;
    let dtheta = T::TAU() / T::from_usize_lossy(ANGULAR_POINTS);
    let dirs: Vec<Complex<T>> = (0..ANGULAR_POINTS)
        .map(|k| Complex::from_polar(T::one(), dtheta * T::from_usize_lossy(k)))
        .collect();
    let mut total = Complex::new(T::zero(), T::zero());
    for p in 0..panels {
        let mid = h * (T::from_usize_lossy(p) + T::lit(0.5));
        for (xi, wi) in x.iter().zip(&w) {
            let r = mid + half * *xi;
            let mut ring = Complex::new(T::zero(), T::zero());
            for d in &dirs {
                ring += stochastic_average_resummed(alpha0 + *d * r, mu, t);
            }
            total += ring * (half * *wi * r * (-r * r).exp() * dtheta);
        }
    }
    Ok(total / T::PI())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn boundary_and_cat_times_are_unbounded() {
        for t in [PI / 4.0, PI / 2.0, 3.0 * PI / 2.0, 3.0 * PI / 4.0, 1.0] {
            assert!(resummed_q0_integrability(c(1.0, 0.0), 1.0, t).unwrap().is_unbounded(), "t={t}");
        }
        for t in [0.0, 0.1, 0.7, PI - 0.1, PI + 0.2] {
            assert!(!resummed_q0_integrability(c(1.0, 0.0), 1.0, t).unwrap().is_unbounded(), "t={t}");
        }
    }

    #[test]
    fn quadrature_at_t_zero_is_mean_of_q0() {
        let a0 = c(0.7, -0.2);
        let v = resummed_q0_quadrature(a0, 1.0, 0.0, 8.0).unwrap();
        assert!((v - a0).norm() < 1e-12);
    }

    #[test]
    fn quadrature_converges_with_radius() {
        let a0 = c(1.0, 0.0);
        let i6 = resummed_q0_quadrature(a0, 1.0, 0.1, 6.0).unwrap();
        let i7 = resummed_q0_quadrature(a0, 1.0, 0.1, 7.0).unwrap();
        let i8 = resummed_q0_quadrature(a0, 1.0, 0.1, 8.0).unwrap();
        assert!((i8 - i6).norm() < 1e-6);
        assert!((i8 - i7).norm() <= (i7 - i6).norm() + 1e-15);
        match resummed_q0_integrability(a0, 1.0, 0.1).unwrap() {
            Q0Integrability::Integrable { deviation, .. } => assert!(deviation.is_finite()),
            other => panic!("{other:?}"),
        }
    }
}
