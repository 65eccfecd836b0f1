//! Exact results for the Kerr oscillator `H = μ(a†a)²` started in a
//! coherent state `|α₀⟩`.
//!
//! The evolution is periodic with period `2π/μ`; every closed form here
//! reduces `t` modulo the period before evaluating.

mod fock;
mod integrability;
mod qfunc;
pub mod quadrature;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::{i_unit, reduce_period, Real};

pub use fock::{antinormal_moment, fock_evolve, fock_evolve_with_cap, mean_a_fock, FockVector, DEFAULT_FOCK_CAP};
pub use integrability::{resummed_q0_integrability, resummed_q0_quadrature, Q0Integrability};
pub use qfunc::{antinormal_moment_quadrature, q_function, q_value, GridSpec, QGrid};

/// Terms allowed in [`ordered_double_average`] before giving up.
pub const SERIES_TERM_CAP: usize = 500;

pub(crate) fn reduced_time<T: Real>(mu: T, t: T) -> T {
    reduce_period(t, T::TAU() / mu)
}

/// `⟨a(t)⟩ = e^{−iμt} α₀ exp(|α₀|²(e^{−i2μt} − 1))` (requires `μ > 0`).
pub fn mean_a_exact<T: Real>(alpha0: Complex<T>, mu: T, t: T) -> Complex<T> {
    let tau = reduced_time(mu, t);
    let i = i_unit::<T>();
    let rot = (-i * (mu * tau)).exp();
    let w = (-i * (T::lit(2.0) * mu * tau)).exp();
    rot * alpha0 * ((w - T::one()) * alpha0.norm_sqr()).exp()
}

/// Fixed-`β` stochastic average of the Q-representation SDEs obtained by
/// re-summing the `|β|²` series: `β e^{i3μt} exp(|β|²(1 − e^{i2μt}))`.
pub fn stochastic_average_resummed<T: Real>(beta: Complex<T>, mu: T, t: T) -> Complex<T> {
    let tau = reduced_time(mu, t);
    let i = i_unit::<T>();
    let rot = (i * (T::lit(3.0) * mu * tau)).exp();
    let w = (i * (T::lit(2.0) * mu * tau)).exp();
    beta * rot * ((-w + T::one()) * beta.norm_sqr()).exp()
}

/// Stochastic average of the positive-P SDEs started at `(β, β⁺)`:
/// `β e^{−iμt} exp(β⁺β(e^{−i2μt} − 1))`.
pub fn positive_p_average_doubled<T: Real>(beta: Complex<T>, beta_plus: Complex<T>, mu: T, t: T) -> Complex<T> {
    let tau = reduced_time(mu, t);
    let i = i_unit::<T>();
    let rot = (-i * (mu * tau)).exp();
    let w = (-i * (T::lit(2.0) * mu * tau)).exp();
    beta * rot * ((w - T::one()) * (beta_plus * beta)).exp()
}

/// [`positive_p_average_doubled`] at `β⁺ = β*`, i.e. for a δ-function
/// positive-P distribution at `β`.
pub fn positive_p_stochastic_average<T: Real>(beta: Complex<T>, mu: T, t: T) -> Complex<T> {
    positive_p_average_doubled(beta, beta.conj(), mu, t)
}

/// Result of a series evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentFormula<T> {
    pub value: Complex<T>,
    pub series_terms_used: usize,
    pub converged: bool,
    pub divergent_reason: Option<String>,
}

/// `⟨⟨α(t)⟩_{Q₀}⟩_S` for the coherent state `|α₀⟩`: the initial-state
/// average taken *before* the stochastic one, summed over `l`:
///
/// ```text
/// e^{i3μt} Σ_l α₀|α₀|^{2l}/(l+1)! · Σ_{n≥l} zⁿ (n+1)!/((n−l)! l!),   z = 1 − e^{i2μt}
/// ```
///
/// Each inner sum is `(l+1) z^l (1−z)^{−(l+2)}`, used in closed form. The
/// `l` series stops once a term falls below `tolerance` relative to the
/// partial sum (and past the largest term), or reports non-convergence
/// after [`SERIES_TERM_CAP`] terms.
pub fn ordered_double_average<T: Real>(alpha0: Complex<T>, mu: T, t: T, tolerance: T) -> Result<MomentFormula<T>> {
    if !(mu > T::zero()) {
        return Err(invalid("mu", "must be > 0"));
    }
    if !(tolerance > T::zero()) {
        return Err(invalid("tolerance", "must be > 0"));
    }
    let zero = Complex::new(T::zero(), T::zero());
    if alpha0 == zero {
        return Ok(MomentFormula {
            value: zero,
            series_terms_used: 1,
            converged: true,
            divergent_reason: None,
        });
    }
    let tau = reduced_time(mu, t);
    let i = i_unit::<T>();
    let e2 = (i * (T::lit(2.0) * mu * tau)).exp();
    let z = -e2 + T::one();
    let inv = e2.inv();
    let x = alpha0.norm_sqr();
    // Terms grow until l ≈ |α₀|²|z|; never stop before that.
    let peak = x * z.norm();

    let mut coef = T::one(); // |α₀|^{2l} / (l+1)!
    let mut geo = inv * inv; // z^l (1−z)^{−(l+2)}
    let mut sum = zero;
    let mut used = 0;
    let mut converged = false;
    for l in 0..SERIES_TERM_CAP {
        let lf = T::from_usize_lossy(l);
        if l > 0 {
            coef = coef * x / (lf + T::one());
            geo = geo * z * inv;
        }
        let inner = geo * (lf + T::one());
        let term = alpha0 * inner * coef;
        sum += term;
        used = l + 1;
        if lf > peak && term.norm() <= tolerance * sum.norm() {
            converged = true;
            break;
        }
    }
    let value = (i * (T::lit(3.0) * mu * tau)).exp() * sum;
    Ok(MomentFormula {
        value,
        series_terms_used: used,
        converged,
        divergent_reason: (!converged)
            .then(|| format!("l-series not below relative tolerance {tolerance} after {used} terms")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn mean_a_exact_special_times() {
        assert_eq!(mean_a_exact(c(0.3, 0.4), 1.0, 0.0), c(0.3, 0.4));
        assert!((mean_a_exact(c(1.0, 0.0), 1.0, PI) - c(-1.0, 0.0)).norm() < 1e-14);
        let quarter = mean_a_exact(c(1.0, 0.0), 1.0, PI / 2.0);
        assert!((quarter - c(0.0, -(-2.0f64).exp())).norm() < 1e-14);
    }

    #[test]
    fn mean_a_exact_bounded_and_periodic() {
        let a0 = c(1.2, -0.4);
        for k in 0..50 {
            let t = k as f64 * 0.37;
            let v = mean_a_exact(a0, 1.3, t);
            assert!(v.norm() <= a0.norm() * (1.0 + 1e-14));
            let w = mean_a_exact(a0, 1.3, t + 2.0 * PI / 1.3);
            assert!((v - w).norm() < 1e-10);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let a0 = c(0.7, 0.9);
        for t in [0.1, 0.8, 2.5] {
            let lhs = mean_a_exact(a0, 1.0, -t);
            let rhs = mean_a_exact(a0.conj(), 1.0, t).conj();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    /// Partial sums of the order-|β|^{2n} terms
    /// `(−1)ⁿ|β|^{2n} e^{iμt}(e^{2iμt} − 1)ⁿ/n!`, times `β e^{i2μt}`.
    fn resummed_partial_sum(beta: Complex<f64>, mu: f64, t: f64, n_terms: usize) -> Complex<f64> {
        let i = c(0.0, 1.0);
        let x = beta.norm_sqr();
        let u = (i * 2.0 * mu * t).exp() - 1.0;
        let mut term = (i * mu * t).exp();
        let mut sum = term;
        for n in 1..n_terms {
            term = term * (-x) * u / n as f64;
            sum += term;
        }
        beta * (i * 2.0 * mu * t).exp() * sum
    }

    #[test]
    fn resummed_matches_series() {
        for &beta in &[c(0.001, 0.1), c(0.5, 0.5), c(1.0, 0.0), c(0.0, -0.8)] {
            for k in 0..=20 {
                let t = PI * k as f64 / 20.0;
                let a = stochastic_average_resummed(beta, 1.0, t);
                let b = resummed_partial_sum(beta, 1.0, t, 40);
                assert!((a - b).norm() < 1e-10, "beta={beta} t={t}");
            }
        }
        assert_eq!(stochastic_average_resummed(c(0.2, 0.1), 1.0, 0.0), c(0.2, 0.1));
    }

    #[test]
    fn resummed_differs_from_exact() {
        let d = (stochastic_average_resummed(c(1.0, 0.0), 1.0, 0.3) - mean_a_exact(c(1.0, 0.0), 1.0, 0.3)).norm();
        assert!(d > 1e-3, "difference {d}");
    }

    #[test]
    fn positive_p_delta_average_is_exact() {
        let b = c(1.0, 0.5);
        let d = positive_p_stochastic_average(b, 1.0, 0.7) - mean_a_exact(b, 1.0, 0.7);
        assert!(d.norm() <= 4.0 * f64::EPSILON);
        assert_eq!(positive_p_stochastic_average(b, 1.0, 0.0), b);
        for k in 0..200 {
            let t = k as f64 * 0.05;
            assert!(positive_p_stochastic_average(b, 1.0, t).norm() <= b.norm() * (1.0 + 1e-15));
        }
    }

    #[test]
    fn ordered_double_average_reproduces_exact() {
        let v = ordered_double_average(c(0.0, 0.0), 1.0, 1.0, 1e-12).unwrap();
        assert_eq!(v.value, c(0.0, 0.0));
        assert!(v.converged);

        let v = ordered_double_average(c(1.0, 0.0), 1.0, PI / 2.0, 1e-14).unwrap();
        assert!(v.converged);
        assert!((v.value - mean_a_exact(c(1.0, 0.0), 1.0, PI / 2.0)).norm() < 1e-10);

        for k in 0..20 {
            let t = 2.0 * PI * k as f64 / 20.0 + 0.01;
            for a0 in [c(0.5, 0.0), c(2.0, 0.0), c(-0.3, 1.1)] {
                let v = ordered_double_average(a0, 1.0, t, 1e-14).unwrap();
                assert!(v.converged);
                assert!((v.value - mean_a_exact(a0, 1.0, t)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn ordered_double_average_reports_nonconvergence() {
        // |α₀|²|z| ≈ 2·10³ puts the largest term far beyond the cap.
        let r = ordered_double_average(c(32.0, 0.0), 1.0, PI / 2.0, 1e-12).unwrap();
        assert!(!r.converged);
        assert!(r.divergent_reason.is_some());
        assert_eq!(r.series_terms_used, SERIES_TERM_CAP);
        assert!(ordered_double_average(c(1.0, 0.0), 1.0, 0.1, 0.0).is_err());
    }
}
