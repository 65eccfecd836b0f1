//! Doubled-phase-space Stratonovich SDEs of the Kerr oscillator.
//!
//! With the diagonal noise choice `C_αα = √(2iμ)α`, `C_α⁺α⁺ = √(−2iμ)α⁺` the
//! Q-function equation maps onto
//!
//! ```text
//! dα/dt  = −i2μ(α⁺α − 1)α  + ξ α
//! dα⁺/dt = +i2μ(α⁺α − 1)α⁺ + ξ⁺α⁺
//! ```
//!
//! In the positive-P representation the noise correlations change sign and
//! the linear term drops out of the Stratonovich drift, `−i2μ(α⁺α)α`.

mod fokker_planck;
mod heun;
mod pathwise;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{i_unit, is_finite_c, Real};

pub use fokker_planck::{
    finite_difference_jacobian, fp_from_langevin, fp_from_langevin_with, kerr_reference_fp, negative_diffusion_check,
    Derivative, DiffusionClass, DiffusionReport, DiffusionSample, FPCoefficients, FpValues, Jacobian,
    LangevinCoefficients,
};
pub use heun::{heun_step, integrate_trajectory, integrate_with, Integrator, Propagator, Trajectory};
pub use pathwise::{pathwise_exact_solution, PathwiseSolution};

/// Which quasi-probability the stochastic variables sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Husimi Q function: antinormally ordered moments.
    Q,
    /// Positive-P: normally ordered moments, diffusion of opposite sign.
    PositiveP,
}

impl Representation {
    /// `+1` for Q, `−1` for positive-P.
    pub fn sign<T: Real>(self) -> T {
        match self {
            Representation::Q => T::one(),
            Representation::PositiveP => -T::one(),
        }
    }

    /// Constant `κ` in the drift `−i2μ(α⁺α − κ)α`.
    pub fn linear_drift<T: Real>(self) -> T {
        match self {
            Representation::Q => T::one(),
            Representation::PositiveP => T::zero(),
        }
    }
}

/// A point `(α, α⁺)` of the doubled phase space. No conjugacy between the
/// two amplitudes is assumed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PhasePoint<T> {
    pub alpha: Complex<T>,
    pub alpha_plus: Complex<T>,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(alpha: Complex<T>, alpha_plus: Complex<T>) -> Self {
        Self { alpha, alpha_plus }
    }

    /// The point `(β, β*)` representing a classical starting amplitude.
    pub fn physical(beta: Complex<T>) -> Self {
        Self {
            alpha: beta,
            alpha_plus: beta.conj(),
        }
    }

    /// `α⁺α`.
    #[inline]
    pub fn product(&self) -> Complex<T> {
        self.alpha_plus * self.alpha
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        is_finite_c(self.alpha) && is_finite_c(self.alpha_plus)
    }

    #[inline]
    pub fn max_norm(&self) -> T {
        self.alpha.norm().max(self.alpha_plus.norm())
    }

    /// Non-finite, or an amplitude beyond `threshold`.
    #[inline]
    pub fn is_divergent(&self, threshold: T) -> bool {
        !self.is_finite() || self.max_norm() > threshold
    }
}

/// Kerr nonlinearity `μ(a†a)²` in a chosen representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrModel<T> {
    mu: T,
    representation: Representation,
    noise_scale: Complex<T>,
    noise_scale_plus: Complex<T>,
}

impl<T: Real> KerrModel<T> {
    pub fn new(mu: T, representation: Representation) -> Result<Self> {
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(invalid("mu", format!("must be finite and > 0, got {mu}")));
        }
        let z = Complex::new(T::zero(), representation.sign::<T>() * T::lit(2.0) * mu);
        Ok(Self {
            mu,
            representation,
            noise_scale: z.sqrt(),
            noise_scale_plus: (-z).sqrt(),
        })
    }

    pub fn q(mu: T) -> Result<Self> {
        Self::new(mu, Representation::Q)
    }

    pub fn positive_p(mu: T) -> Result<Self> {
        Self::new(mu, Representation::PositiveP)
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    /// `2π/μ`.
    pub fn period(&self) -> T {
        T::TAU() / self.mu
    }

    /// Stratonovich drift `(B_α, B_α⁺)`.
    #[inline]
    pub fn drift(&self, p: &PhasePoint<T>) -> (Complex<T>, Complex<T>) {
        let kappa = self.representation.linear_drift::<T>();
        let w = (p.product() - kappa) * (T::lit(2.0) * self.mu);
        let iw = i_unit::<T>() * w;
        (-iw * p.alpha, iw * p.alpha_plus)
    }

    /// `(√(s·2iμ), √(−s·2iμ))`: the noise coefficients divided by `α`, `α⁺`.
    pub fn noise_scales(&self) -> (Complex<T>, Complex<T>) {
        (self.noise_scale, self.noise_scale_plus)
    }
}
