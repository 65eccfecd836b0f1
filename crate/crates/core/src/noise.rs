//! Discrete complex noise increments for the doubled-phase-space SDEs.
//!
//! The continuum noises satisfy `⟨ξξ⟩ = 2iμ δ`, `⟨ξ⁺ξ⁺⟩ = −2iμ δ` and
//! `⟨ξξ⁺⟩ = 0` in the Q representation (signs flipped for positive-P). They
//! are realised as `ξ = √(2iμ) φ`, `ξ⁺ = √(−2iμ) φ⁺` with `φ, φ⁺` independent
//! real white noises, so one step of length `Δt` carries the increments
//!
//! ```text
//! η_l  = √( s·2iμΔt) · g_l
//! η⁺_l = √(−s·2iμΔt) · g⁺_l
//! ```
//!
//! with `g_l, g⁺_l` independent standard normals and `s = ±1` the
//! representation sign. Square roots take the principal branch.
//!
//! # Streams
//!
//! Each trajectory owns a ChaCha8 stream keyed by the master seed (expanded
//! through SplitMix64) with the trajectory index as the 64-bit stream id, so
//! any trajectory can be regenerated on its own and in any order. Normals
//! come in pairs from the Box–Muller transform of two 53-bit uniforms
//! `u₁ ∈ (0, 1]`, `u₂ ∈ [0, 1)`: `g = √(−2 ln u₁) cos 2πu₂`,
//! `g⁺ = √(−2 ln u₁) sin 2πu₂`.

use std::io::{self, Write};

use num_complex::Complex;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::sde::Representation;

/// Stream domain for noise increments.
pub const DOMAIN_NOISE: u64 = 0x6e6f_6973_655f_7631;
/// Stream domain for initial-condition sampling.
pub const DOMAIN_INITIAL: u64 = 0x696e_6974_5f5f_7631;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig<T> {
    pub mu: T,
    pub dt: T,
    pub representation: Representation,
    pub stream_seed: u64,
    pub trajectory_index: u64,
}

impl<T: Real> NoiseConfig<T> {
    pub fn new(
        mu: T,
        dt: T,
        representation: Representation,
        stream_seed: u64,
        trajectory_index: u64,
    ) -> Result<Self> {
        let cfg = Self {
            mu,
            dt,
            representation,
            stream_seed,
            trajectory_index,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero()) || !self.mu.is_finite() {
            return Err(invalid("mu", format!("must be finite and > 0, got {}", self.mu)));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

/// The per-step factors `(√(s·2iμΔt), √(−s·2iμΔt))`.
pub fn increment_scales<T: Real>(mu: T, dt: T, representation: Representation) -> (Complex<T>, Complex<T>) {
    let s = representation.sign::<T>();
    let z = Complex::new(T::zero(), s * T::lit(2.0) * mu * dt);
    (z.sqrt(), (-z).sqrt())
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based generator for trajectory `index` within stream `domain`.
pub fn stream_rng(master_seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut state = master_seed ^ domain;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Standard normal pairs via Box–Muller.
#[derive(Debug, Clone)]
pub struct GaussianPairs<R> {
    rng: R,
}

impl<R: RngCore> GaussianPairs<R> {
    pub fn new(rng: R) -> Self {
        Self { rng }
    }

    #[inline]
    pub fn next_pair(&mut self) -> (f64, f64) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

/// Endless stream of increment pairs `(η_l, η⁺_l)` for one trajectory.
#[derive(Debug, Clone)]
pub struct NoiseStream<T> {
    gauss: GaussianPairs<ChaCha8Rng>,
    scale: Complex<T>,
    scale_plus: Complex<T>,
}

impl<T: Real> NoiseStream<T> {
    pub fn new(cfg: &NoiseConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let (scale, scale_plus) = increment_scales(cfg.mu, cfg.dt, cfg.representation);
        Ok(Self {
            gauss: GaussianPairs::new(stream_rng(cfg.stream_seed, DOMAIN_NOISE, cfg.trajectory_index)),
            scale,
            scale_plus,
        })
    }

    #[inline]
    pub fn next_increment(&mut self) -> (Complex<T>, Complex<T>) {
        let (g, gp) = self.gauss.next_pair();
        (self.scale * T::lit(g), self.scale_plus * T::lit(gp))
    }
}

impl<T: Real> Iterator for NoiseStream<T> {
    type Item = (Complex<T>, Complex<T>);

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_increment())
    }
}

/// One trajectory's increments together with their running sums.
///
/// Index `l` of every sequence refers to step `l`, i.e. the interval
/// `[lΔt, (l+1)Δt]`; `cum_xi[l]` is the integral of `ξ` up to `(l+1)Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath<T> {
    pub mu: T,
    pub dt: T,
    pub representation: Representation,
    pub increments: Vec<(Complex<T>, Complex<T>)>,
    pub cum_xi: Vec<Complex<T>>,
    pub cum_xi_plus: Vec<Complex<T>>,
    pub cum_sum_both: Vec<Complex<T>>,
}

impl<T: Real> NoisePath<T> {
    pub fn from_increments(
        mu: T,
        dt: T,
        representation: Representation,
        increments: Vec<(Complex<T>, Complex<T>)>,
    ) -> Self {
        let n = increments.len();
        let mut cum_xi = Vec::with_capacity(n);
        let mut cum_xi_plus = Vec::with_capacity(n);
        let mut cum_sum_both = Vec::with_capacity(n);
        let zero = Complex::new(T::zero(), T::zero());
        let (mut w, mut wp, mut both) = (zero, zero, zero);
        for &(eta, eta_plus) in &increments {
            w += eta;
            wp += eta_plus;
            both += eta + eta_plus;
            cum_xi.push(w);
            cum_xi_plus.push(wp);
            cum_sum_both.push(both);
        }
        Self {
            mu,
            dt,
            representation,
            increments,
            cum_xi,
            cum_xi_plus,
            cum_sum_both,
        }
    }

    /// A path with every increment zero (deterministic dynamics).
    pub fn zeros(mu: T, dt: T, representation: Representation, n_steps: usize) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self::from_increments(mu, dt, representation, vec![(zero, zero); n_steps])
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn time(&self, t_index: usize) -> T {
        T::from_usize_lossy(t_index) * self.dt
    }

    /// `∫₀^{t} ξ dt'` at `t = t_index·Δt`.
    pub fn xi_integral(&self, t_index: usize) -> Complex<T> {
        Self::prefix(&self.cum_xi, t_index)
    }

    pub fn xi_plus_integral(&self, t_index: usize) -> Complex<T> {
        Self::prefix(&self.cum_xi_plus, t_index)
    }

    /// `∫₀^{t} (ξ + ξ⁺) dt'` at `t = t_index·Δt`.
    pub fn both_integral(&self, t_index: usize) -> Complex<T> {
        Self::prefix(&self.cum_sum_both, t_index)
    }

    fn prefix(seq: &[Complex<T>], t_index: usize) -> Complex<T> {
        if t_index == 0 {
            Complex::new(T::zero(), T::zero())
        } else {
            seq[t_index - 1]
        }
    }

    /// The same Brownian path seen on a grid `factor` times coarser.
    /// Trailing fine steps that do not fill a coarse step are dropped.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || factor > self.len() {
            return Err(invalid(
                "factor",
                format!("must be in 1..={}, got {factor}", self.len()),
            ));
        }
        let increments = self
            .increments
            .chunks_exact(factor)
            .map(|chunk| {
                chunk.iter().fold(
                    (Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero())),
                    |(a, b), &(x, y)| (a + x, b + y),
                )
            })
            .collect();
        Ok(Self::from_increments(
            self.mu,
            self.dt * T::from_usize_lossy(factor),
            self.representation,
            increments,
        ))
    }

    /// Debug dump: `step, re_eta, im_eta, re_eta_plus, im_eta_plus`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,re_eta,im_eta,re_eta_plus,im_eta_plus")?;
        for (l, (eta, eta_plus)) in self.increments.iter().enumerate() {
            writeln!(out, "{l},{:e},{:e},{:e},{:e}", eta.re, eta.im, eta_plus.re, eta_plus.im)?;
        }
        Ok(())
    }
}

/// Generate `n_steps` increments for the trajectory named by `cfg`.
pub fn sample_noise_path<T: Real>(cfg: &NoiseConfig<T>, n_steps: usize) -> Result<NoisePath<T>> {
    if n_steps == 0 {
        return Err(invalid("n_steps", "must be >= 1"));
    }
    let stream = NoiseStream::new(cfg)?;
    let increments = stream.take(n_steps).collect();
    Ok(NoisePath::from_increments(cfg.mu, cfg.dt, cfg.representation, increments))
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentCheck {
    pub name: &'static str,
    pub empirical: Complex<f64>,
    pub target: Complex<f64>,
    pub stderr_re: f64,
    pub stderr_im: f64,
    /// Largest component-wise `|empirical − target| / stderr`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseReport {
    pub n_samples: usize,
    pub mu: f64,
    pub dt: f64,
    pub representation_sign: f64,
    pub checks: Vec<MomentCheck>,
}

impl NoiseReport {
    pub fn max_abs_z(&self) -> f64 {
        self.checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }

    pub fn check(&self, name: &str) -> Option<&MomentCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const MIN_NOISE_SAMPLES: usize = 1000;

#[derive(Default, Clone, Copy)]
struct Sums {
    re: f64,
    im: f64,
    re2: f64,
    im2: f64,
}

impl Sums {
    fn push(&mut self, z: Complex<f64>) {
        self.re += z.re;
        self.im += z.im;
        self.re2 += z.re * z.re;
        self.im2 += z.im * z.im;
    }
}

/// Empirical first and second moments of the pooled increments of
/// `paths`, each compared with its target value by a z-score.
pub fn noise_statistics<T: Real>(paths: &[NoisePath<T>]) -> Result<NoiseReport> {
    let n: usize = paths.iter().map(NoisePath::len).sum();
    if n < MIN_NOISE_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_NOISE_SAMPLES,
            got: n,
        });
    }
    let first = &paths[0];
    if paths
        .iter()
        .any(|p| p.mu != first.mu || p.dt != first.dt || p.representation != first.representation)
    {
        return Err(invalid("paths", "all paths must share mu, dt and representation"));
    }
    let mu = first.mu.to_f64_lossy();
    let dt = first.dt.to_f64_lossy();
    let s: f64 = first.representation.sign();
    let scale = 2.0 * mu * dt;

    const NAMES: [&str; 6] = ["eta", "eta^2", "eta_plus^2", "eta*eta_plus", "|eta|^2", "eta*conj(eta_plus)"];
    let targets = [
        Complex::new(0.0, 0.0),
        Complex::new(0.0, s * scale),
        Complex::new(0.0, -s * scale),
        Complex::new(0.0, 0.0),
        Complex::new(scale, 0.0),
        Complex::new(0.0, 0.0),
    ];
    let mut sums = [Sums::default(); 6];
    for path in paths {
        for &(eta, eta_plus) in &path.increments {
            let e = Complex::new(eta.re.to_f64_lossy(), eta.im.to_f64_lossy());
            let ep = Complex::new(eta_plus.re.to_f64_lossy(), eta_plus.im.to_f64_lossy());
            sums[0].push(e);
            sums[1].push(e * e);
            sums[2].push(ep * ep);
            sums[3].push(e * ep);
            sums[4].push(Complex::new(e.norm_sqr(), 0.0));
            sums[5].push(e * ep.conj());
        }
    }

    let nf = n as f64;
    let checks = NAMES
        .iter()
        .zip(targets)
        .zip(sums)
        .map(|((&name, target), s)| {
            let mean = Complex::new(s.re / nf, s.im / nf);
            let se = |sum2: f64, m: f64| ((sum2 / nf - m * m).max(0.0) * nf / (nf - 1.0) / nf).sqrt();
            let stderr_re = se(s.re2, mean.re);
            let stderr_im = se(s.im2, mean.im);
            let z = component_z(mean.re - target.re, stderr_re, scale)
                .max(component_z(mean.im - target.im, stderr_im, scale));
            MomentCheck {
                name,
                empirical: mean,
                target,
                stderr_re,
                stderr_im,
                z,
            }
        })
        .collect();

    Ok(NoiseReport {
        n_samples: n,
        mu,
        dt,
        representation_sign: s,
        checks,
    })
}

/// Components that are identically zero by construction (e.g. `Re η²`)
/// carry only rounding noise; they are compared in absolute terms.
fn component_z(diff: f64, stderr: f64, scale: f64) -> f64 {
    if stderr <= 1e-12 * scale {
        if diff.abs() <= 1e-9 * scale {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff.abs() / stderr
    }
}
