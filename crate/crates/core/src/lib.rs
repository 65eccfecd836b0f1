//! Stochastic and exact treatment of the single-mode Kerr (anharmonic)
//! oscillator in the Q representation.
//!
//! The Q-function evolution equation of the Kerr oscillator has negative
//! diffusion, so its Langevin form needs two *independent* complex noises
//! and a pair of non-conjugate amplitudes `(α, α⁺)`. This crate provides
//!
//! * [`noise`]: reproducible per-trajectory streams of the complex noise
//!   increments,
//! * [`sde`]: the Stratonovich SDE model, a Heun stepper, the pathwise-exact
//!   solution and the Langevin → Fokker-Planck coefficient mapping,
//! * [`analytic`]: exact ground truth (truncated Fock evolution, closed-form
//!   moments, Q-function grids, the averaging-order diagnosis),
//! * [`ensemble`]: trajectory ensembles with standard errors and divergence
//!   bookkeeping.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.
//!
//! All quantities are in the frame rotating with the free oscillator
//! frequency, and time is measured in the same units as `1/μ`.

pub mod analytic;
pub mod ensemble;
pub mod error;
pub mod noise;
pub mod scalar;
pub mod sde;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::Real;
pub use sde::{KerrModel, PhasePoint, Representation};

pub type Complex64 = Complex<f64>;
pub type PhasePoint64 = sde::PhasePoint<f64>;
pub type KerrModel64 = sde::KerrModel<f64>;
pub type Trajectory64 = sde::Trajectory<f64>;
pub type NoiseConfig64 = noise::NoiseConfig<f64>;
pub type NoisePath64 = noise::NoisePath<f64>;
pub type FockVector64 = analytic::FockVector<f64>;
pub type QGrid64 = analytic::QGrid<f64>;
pub type EnsembleConfig64 = ensemble::EnsembleConfig<f64>;
pub type MomentSeries64 = ensemble::MomentSeries<f64>;
