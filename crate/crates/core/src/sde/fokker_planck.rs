//! Langevin → Fokker-Planck coefficient correspondence (Stratonovich).
//!
//! For Langevin equations `ż_i = B_i + Σ_j C_ij f_j` with real white noises
//! `⟨f_i f_j⟩ = δ_ij δ(t − t′)` and `z = (α, α*)`, the equivalent
//! Fokker-Planck equation has
//!
//! ```text
//! D_ik = Σ_j C_ij C_kj
//! A_i  = B_i + ½ Σ_{j,l} (∂_l C_ij) C_lj
//! ```
//!
//! In the doubled phase space `α*` is replaced by the independent `α⁺` and
//! derivatives are holomorphic derivatives in each variable.

use num_complex::Complex;
use serde::Serialize;

use super::{KerrModel, PhasePoint};
use crate::error::{Error, Result};
use crate::scalar::{i_unit, is_finite_c, Real};

/// `jac[i][j][l] = ∂C_ij / ∂z_l`.
pub type Jacobian<T> = [[[Complex<T>; 2]; 2]; 2];

/// Coefficient functions of a two-variable Langevin system.
/// Row index 0 is the `α` equation, 1 the `α⁺` equation; column index `j`
/// selects the noise `f_α` or `f_α*`.
pub trait LangevinCoefficients<T: Real> {
    fn drift(&self, p: &PhasePoint<T>) -> [Complex<T>; 2];
    fn noise(&self, p: &PhasePoint<T>) -> [[Complex<T>; 2]; 2];
    /// Analytic derivatives of the noise matrix, where available.
    fn noise_jacobian(&self, _p: &PhasePoint<T>) -> Option<Jacobian<T>> {
        None
    }
}

impl<T: Real> LangevinCoefficients<T> for KerrModel<T> {
    fn drift(&self, p: &PhasePoint<T>) -> [Complex<T>; 2] {
        let (a, b) = KerrModel::drift(self, p);
        [a, b]
    }

    fn noise(&self, p: &PhasePoint<T>) -> [[Complex<T>; 2]; 2] {
        let (s, sp) = self.noise_scales();
        let zero = Complex::new(T::zero(), T::zero());
        [[s * p.alpha, zero], [zero, sp * p.alpha_plus]]
    }

    fn noise_jacobian(&self, _p: &PhasePoint<T>) -> Option<Jacobian<T>> {
        let (s, sp) = self.noise_scales();
        let zero = Complex::new(T::zero(), T::zero());
        let mut jac = [[[zero; 2]; 2]; 2];
        jac[0][0][0] = s;
        jac[1][1][1] = sp;
        Some(jac)
    }
}

/// Drift and diffusion of the Fokker-Planck equation at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpValues<T> {
    /// `(A_α, A_α*)`.
    pub drift: [Complex<T>; 2],
    /// `D_αα`.
    pub d_aa: Complex<T>,
    /// `D_α*α*`.
    pub d_ss: Complex<T>,
    /// `D_αα*`.
    pub d_as: Complex<T>,
}

impl<T: Real> FpValues<T> {
    /// Largest relative component difference against `reference`.
    pub fn max_relative_residual(&self, reference: &FpValues<T>) -> T {
        let pairs = [
            (self.drift[0], reference.drift[0]),
            (self.drift[1], reference.drift[1]),
            (self.d_aa, reference.d_aa),
            (self.d_ss, reference.d_ss),
            (self.d_as, reference.d_as),
        ];
        pairs
            .iter()
            .map(|(a, b)| {
                let scale = b.norm().max(T::min_positive_value());
                if (*a - *b).norm() == T::zero() {
                    T::zero()
                } else {
                    (*a - *b).norm() / scale
                }
            })
            .fold(T::zero(), T::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivative<T> {
    /// Use the analytic Jacobian, falling back to finite differences when
    /// the coefficients do not provide one.
    Analytic,
    /// Fourth-order central differences with the given complex step size.
    FiniteDifference(T),
}

/// Fokker-Planck coefficients generated from a Langevin system.
#[derive(Debug, Clone, Copy)]
pub struct FPCoefficients<'a, L, T> {
    langevin: &'a L,
    derivative: Derivative<T>,
}

pub fn fp_from_langevin<T: Real, L: LangevinCoefficients<T>>(langevin: &L) -> FPCoefficients<'_, L, T> {
    fp_from_langevin_with(langevin, Derivative::Analytic)
}

pub fn fp_from_langevin_with<T: Real, L: LangevinCoefficients<T>>(
    langevin: &L,
    derivative: Derivative<T>,
) -> FPCoefficients<'_, L, T> {
    FPCoefficients { langevin, derivative }
}

fn check_finite<T: Real>(z: Complex<T>, what: &'static str, p: &PhasePoint<T>) -> Result<()> {
    if is_finite_c(z) {
        Ok(())
    } else {
        Err(Error::NonEvaluable {
            what,
            re: p.alpha.re.to_f64_lossy(),
            im: p.alpha.im.to_f64_lossy(),
        })
    }
}

impl<L: LangevinCoefficients<T>, T: Real> FPCoefficients<'_, L, T> {
    pub fn at(&self, p: &PhasePoint<T>) -> Result<FpValues<T>> {
        let b = self.langevin.drift(p);
        let c = self.langevin.noise(p);
        for z in b {
            check_finite(z, "drift", p)?;
        }
        for z in c.iter().flatten() {
            check_finite(*z, "noise coefficient", p)?;
        }
        let jac = match self.derivative {
            Derivative::Analytic => match self.langevin.noise_jacobian(p) {
                Some(j) => j,
                None => finite_difference_jacobian(self.langevin, p, T::lit(1e-3))?,
            },
            Derivative::FiniteDifference(h) => finite_difference_jacobian(self.langevin, p, h)?,
        };
        for z in jac.iter().flatten().flatten() {
            check_finite(*z, "noise derivative", p)?;
        }

        let d = |i: usize, k: usize| c[i][0] * c[k][0] + c[i][1] * c[k][1];
        let half = T::lit(0.5);
        let mut drift = b;
        for (i, a) in drift.iter_mut().enumerate() {
            let mut corr = Complex::new(T::zero(), T::zero());
            for j in 0..2 {
                for l in 0..2 {
                    corr += jac[i][j][l] * c[l][j];
                }
            }
            *a += corr * half;
        }
        Ok(FpValues {
            drift,
            d_aa: d(0, 0),
            d_ss: d(1, 1),
            d_as: d(0, 1),
        })
    }
}

/// Numerical Jacobian of the noise matrix by fourth-order central
/// differences along each (complex) variable.
pub fn finite_difference_jacobian<T: Real, L: LangevinCoefficients<T> + ?Sized>(
    langevin: &L,
    p: &PhasePoint<T>,
    h: T,
) -> Result<Jacobian<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut jac = [[[zero; 2]; 2]; 2];
    let shift = |l: usize, by: T| {
        let mut q = *p;
        let dz = Complex::new(by, T::zero());
        if l == 0 {
            q.alpha += dz;
        } else {
            q.alpha_plus += dz;
        }
        langevin.noise(&q)
    };
    let (eight, twelve) = (T::lit(8.0), T::lit(12.0));
    for l in 0..2 {
        let p2 = shift(l, h + h);
        let p1 = shift(l, h);
        let m1 = shift(l, -h);
        let m2 = shift(l, -(h + h));
        for i in 0..2 {
            for j in 0..2 {
                let v = (m2[i][j] - p2[i][j] + (p1[i][j] - m1[i][j]) * eight) / (h * twelve);
                check_finite(v, "finite-difference derivative", p)?;
                jac[i][j][l] = v;
            }
        }
    }
    Ok(jac)
}

/// The Fokker-Planck coefficients of the Kerr oscillator written down
/// directly, with `|α|² → α⁺α`.
///
/// Q: `A_α = −iμ(2α⁺α − 3)α`, `D_αα = 2iμα²`, `D_α⁺α⁺ = −2iμα⁺²`,
/// `D_αα⁺ = 0`. Positive-P: `A_α = −iμ(2α⁺α + 1)α`, `D_αα = −2iμα²`.
pub fn kerr_reference_fp<T: Real>(model: &KerrModel<T>, p: &PhasePoint<T>) -> FpValues<T> {
    let i = i_unit::<T>();
    let mu = model.mu();
    let n = p.product() * T::lit(2.0);
    let (shift, sign) = match model.representation() {
        super::Representation::Q => (T::lit(-3.0), T::one()),
        super::Representation::PositiveP => (T::one(), -T::one()),
    };
    let two_i_mu = i * (T::lit(2.0) * mu * sign);
    FpValues {
        drift: [
            -i * (n + shift) * p.alpha * mu,
            i * (n + shift) * p.alpha_plus * mu,
        ],
        d_aa: two_i_mu * p.alpha * p.alpha,
        d_ss: -two_i_mu * p.alpha_plus * p.alpha_plus,
        d_as: Complex::new(T::zero(), T::zero()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionClass {
    /// `D_αα* < |D_αα|`.
    Negative,
    NonNegative,
    /// `D_αα* = |D_αα| = 0`, e.g. the origin of the Kerr model.
    Boundary,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiffusionSample<T> {
    pub point: PhasePoint<T>,
    /// `Re D_αα*`.
    pub d_cross: T,
    /// `|D_αα|`.
    pub d_abs: T,
    pub class: DiffusionClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionReport<T> {
    pub samples: Vec<DiffusionSample<T>>,
    /// True iff every sample has negative diffusion.
    pub negative_everywhere: bool,
}

/// Classify each sample point by the negative-diffusion condition
/// `D_αα* < |D_αα|`.
pub fn negative_diffusion_check<T: Real, L: LangevinCoefficients<T>>(
    fp: &FPCoefficients<'_, L, T>,
    sample_points: &[PhasePoint<T>],
) -> Result<DiffusionReport<T>> {
    let mut samples = Vec::with_capacity(sample_points.len());
    for p in sample_points {
        let v = fp.at(p)?;
        let d_cross = v.d_as.re;
        let d_abs = v.d_aa.norm();
        let tiny = T::epsilon() * T::lit(16.0);
        let class = if d_cross < d_abs {
            DiffusionClass::Negative
        } else if d_abs <= tiny && d_cross.abs() <= tiny {
            DiffusionClass::Boundary
        } else {
            DiffusionClass::NonNegative
        };
        samples.push(DiffusionSample {
            point: *p,
            d_cross,
            d_abs,
            class,
        });
    }
    let negative_everywhere = !samples.is_empty() && samples.iter().all(|s| s.class == DiffusionClass::Negative);
    Ok(DiffusionReport {
        samples,
        negative_everywhere,
    })
}
