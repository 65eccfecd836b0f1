use num_complex::Complex;

use super::{KerrModel, PhasePoint};
use crate::error::{invalid, Result};
use crate::noise::NoisePath;
use crate::scalar::{i_unit, Real};

/// Closed-form solution of the SDEs for one noise realisation.
///
/// Because `d(α⁺α)/dt = (ξ + ξ⁺)α⁺α`, the product is
/// `α⁺α(t) = α⁺(0)α(0)·e^{S(t)}` with `S = ∫(ξ + ξ⁺)`, and each amplitude
/// then solves a linear equation:
///
/// ```text
/// α(t)  = α(0) ·exp{ −i2μ∫₀ᵗ(α⁺α(t′) − κ)dt′ + ∫₀ᵗξ }
/// α⁺(t) = α⁺(0)·exp{ +i2μ∫₀ᵗ(α⁺α(t′) − κ)dt′ + ∫₀ᵗξ⁺ }
/// ```
///
/// with `κ = 1` for Q and `κ = 0` for positive-P. The inner integral is
/// accumulated by the trapezoid rule on the step grid.
#[derive(Debug, Clone)]
pub struct PathwiseSolution<T> {
    initial: PhasePoint<T>,
    product0: Complex<T>,
    kappa: T,
    two_mu: T,
    half_dt: T,
    xi: Complex<T>,
    xi_plus: Complex<T>,
    both: Complex<T>,
    inner: Complex<T>,
    f_prev: Complex<T>,
    steps: usize,
}

impl<T: Real> PathwiseSolution<T> {
    pub fn new(model: &KerrModel<T>, initial: PhasePoint<T>, dt: T) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        let kappa = model.representation().linear_drift::<T>();
        let product0 = initial.product();
        Self {
            initial,
            product0,
            kappa,
            two_mu: T::lit(2.0) * model.mu(),
            half_dt: T::lit(0.5) * dt,
            xi: zero,
            xi_plus: zero,
            both: zero,
            inner: zero,
            f_prev: product0 - kappa,
            steps: 0,
        }
    }

    #[inline]
    pub fn advance(&mut self, (eta, eta_plus): (Complex<T>, Complex<T>)) {
        self.xi += eta;
        self.xi_plus += eta_plus;
        self.both += eta + eta_plus;
        let f = self.product0 * self.both.exp() - self.kappa;
        self.inner += (self.f_prev + f) * self.half_dt;
        self.f_prev = f;
        self.steps += 1;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `α⁺α` as given by the running noise integral alone.
    pub fn product(&self) -> Complex<T> {
        self.product0 * self.both.exp()
    }

    #[inline]
    pub fn point(&self) -> PhasePoint<T> {
        let phase = -i_unit::<T>() * self.inner * self.two_mu;
        PhasePoint {
            alpha: self.initial.alpha * (phase + self.xi).exp(),
            alpha_plus: self.initial.alpha_plus * (self.xi_plus - phase).exp(),
        }
    }
}

/// Evaluate the pathwise solution from `(β, β*)` at `t = t_index·Δt`.
///
/// Overflow shows up as a non-finite point (see
/// [`PhasePoint::is_divergent`]).
pub fn pathwise_exact_solution<T: Real>(
    model: &KerrModel<T>,
    beta: Complex<T>,
    path: &NoisePath<T>,
    t_index: usize,
) -> Result<PhasePoint<T>> {
    if t_index > path.len() {
        return Err(invalid(
            "t_index",
            format!("must be <= path length {}, got {t_index}", path.len()),
        ));
    }
    if path.representation != model.representation() || path.mu != model.mu() {
        return Err(invalid("path", "noise path was generated for a different model"));
    }
    let mut sol = PathwiseSolution::new(model, PhasePoint::physical(beta), path.dt);
    for &eta in &path.increments[..t_index] {
        sol.advance(eta);
    }
    Ok(sol.point())
}
