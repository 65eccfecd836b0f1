//! Trajectory ensembles: sampling of initial conditions, moment estimates
//! with standard errors, divergence bookkeeping and the averaging-order
//! experiment.
//!
//! Trajectory `i` always draws from the streams keyed by `(master_seed, i)`,
//! and partial results are reduced in fixed chunks of ascending index, so a
//! run is bit-for-bit reproducible whatever the thread count.

mod divergence;
mod experiment;
pub mod stats;

use std::io::{self, Write};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::noise::{stream_rng, GaussianPairs, NoiseConfig, NoiseStream, DOMAIN_INITIAL};
use crate::scalar::{is_finite_c, Real};
use crate::sde::{Integrator, KerrModel, PhasePoint, Propagator};
use stats::{mann_kendall, MannKendall, Welford};

pub use divergence::{divergence_statistics, DivergenceRow, DivergenceTable, MIN_DIVERGENCE_TRAJECTORIES};
pub use experiment::{averaging_order_experiment, AveragingOrderReport, FixedBetaBranch, OrderedBranch, SampledBranch};

/// Trajectories per reduction chunk.
pub const CHUNK: usize = 256;

/// How `(α(0), α⁺(0))` is chosen for each trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum InitialMode<T> {
    /// Every trajectory starts at `(β, β*)`.
    FixedBeta(Complex<T>),
    /// `β = α₀ + g` with `g` drawn from `e^{−|g|²}/π`, the Q function of `|α₀⟩`.
    SampleQ0(Complex<T>),
    /// `(α₀, α₀*)`: the δ-function positive-P distribution of `|α₀⟩`.
    DeltaPositiveP(Complex<T>),
}

impl<T: Real> InitialMode<T> {
    /// `β`, `α₀` or `α₀` respectively.
    pub fn center(&self) -> Complex<T> {
        match *self {
            InitialMode::FixedBeta(b) | InitialMode::SampleQ0(b) | InitialMode::DeltaPositiveP(b) => b,
        }
    }
}

/// Draw an initial point; `α⁺(0) = α(0)*` in every mode.
pub fn sample_initial<T: Real, R: rand_core::RngCore>(mode: &InitialMode<T>, gauss: &mut GaussianPairs<R>) -> PhasePoint<T> {
    match *mode {
        InitialMode::FixedBeta(b) | InitialMode::DeltaPositiveP(b) => PhasePoint::physical(b),
        InitialMode::SampleQ0(a0) => {
            let (g1, g2) = gauss.next_pair();
            let s = std::f64::consts::FRAC_1_SQRT_2;
            PhasePoint::physical(a0 + Complex::new(T::lit(g1 * s), T::lit(g2 * s)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig<T> {
    pub n_trajectories: usize,
    pub initial_mode: InitialMode<T>,
    pub t_final: T,
    pub dt: T,
    /// Record every `record_stride`-th step (the last step is always kept).
    pub record_stride: usize,
    /// A trajectory with `|α|` or `|α⁺|` above this, or non-finite, has diverged.
    pub divergence_threshold: T,
    pub master_seed: u64,
    pub integrator: Integrator,
    /// Drive every trajectory with zero increments (testing hook).
    pub zero_noise: bool,
}

impl<T: Real> EnsembleConfig<T> {
    /// Defaults: `dt = 1e-4`, stride 100, threshold `1e6`, Heun stepping.
    pub fn new(n_trajectories: usize, initial_mode: InitialMode<T>, t_final: T) -> Self {
        Self {
            n_trajectories,
            initial_mode,
            t_final,
            dt: T::lit(1e-4),
            record_stride: 100,
            divergence_threshold: T::lit(1e6),
            master_seed: 0,
            integrator: Integrator::Heun,
            zero_noise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories < 1 {
            return Err(invalid("n_trajectories", "must be >= 1"));
        }
        if !(self.t_final > T::zero()) || !self.t_final.is_finite() {
            return Err(invalid("t_final", format!("must be finite and > 0, got {}", self.t_final)));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        if self.record_stride < 1 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        if !(self.divergence_threshold > T::zero()) {
            return Err(invalid("divergence_threshold", "must be > 0"));
        }
        if !is_finite_c(self.initial_mode.center()) {
            return Err(invalid("initial_mode", "initial amplitude must be finite"));
        }
        self.n_steps().map(|_| ())
    }

    /// `t_final / dt`, which must be an integer to within `1e-6`.
    pub fn n_steps(&self) -> Result<usize> {
        let r = (self.t_final / self.dt).to_f64_lossy();
        let n = r.round();
        if !(n >= 1.0) || (r - n).abs() > 1e-6 * n.max(1.0) || n > usize::MAX as f64 {
            return Err(invalid("dt", format!("t_final / dt = {r} is not a positive integer")));
        }
        Ok(n as usize)
    }

    /// Step indices that are recorded: `0, stride, 2·stride, …` and the last step.
    pub fn record_steps(&self) -> Result<Vec<usize>> {
        let n = self.n_steps()?;
        let mut steps: Vec<usize> = (0..=n).step_by(self.record_stride).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        Ok(steps)
    }
}

/// Advance trajectory `index` step by step, calling `record(slot, point)` at
/// each recorded step while it is alive. Returns the divergence time.
pub(crate) fn run_trajectory<T: Real>(
    model: &KerrModel<T>,
    cfg: &EnsembleConfig<T>,
    record_steps: &[usize],
    index: u64,
    mut record: impl FnMut(usize, &PhasePoint<T>),
) -> Result<Option<T>> {
    let mut gauss = GaussianPairs::new(stream_rng(cfg.master_seed, DOMAIN_INITIAL, index));
    let initial = sample_initial(&cfg.initial_mode, &mut gauss);
    let thr2 = cfg.divergence_threshold * cfg.divergence_threshold;
    let dead = |p: &PhasePoint<T>| !p.is_finite() || p.alpha.norm_sqr().max(p.alpha_plus.norm_sqr()) > thr2;
    if dead(&initial) {
        return Ok(Some(T::zero()));
    }
    record(0, &initial);
    let mut noise = NoiseStream::new(&NoiseConfig::new(model.mu(), cfg.dt, model.representation(), cfg.master_seed, index)?)?;
    let zero = Complex::new(T::zero(), T::zero());
    let mut prop = Propagator::new(cfg.integrator, model, initial, cfg.dt);
    let n = *record_steps.last().unwrap_or(&0);
    let mut slot = 1;
    for k in 1..=n {
        let eta = if cfg.zero_noise { (zero, zero) } else { noise.next_increment() };
        let p = prop.advance(eta);
        if dead(&p) {
            return Ok(Some(cfg.dt * T::from_usize_lossy(k)));
        }
        if slot < record_steps.len() && record_steps[slot] == k {
            record(slot, &p);
            slot += 1;
        }
    }
    Ok(None)
}

/// Component-wise accumulators for one recorded time.
#[derive(Debug, Clone, Copy, Default)]
struct SlotAcc<T> {
    a_re: Welford<T>,
    a_im: Welford<T>,
    p_re: Welford<T>,
    p_im: Welford<T>,
}

impl<T: Real> SlotAcc<T> {
    fn push(&mut self, p: &PhasePoint<T>) {
        let prod = p.product();
        self.a_re.push(p.alpha.re);
        self.a_im.push(p.alpha.im);
        self.p_re.push(prod.re);
        self.p_im.push(prod.im);
    }

    fn merge(&mut self, o: &Self) {
        self.a_re.merge(&o.a_re);
        self.a_im.merge(&o.a_im);
        self.p_re.merge(&o.p_re);
        self.p_im.merge(&o.p_im);
    }
}

/// Per-time ensemble estimates over surviving trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries<T> {
    pub times: Vec<T>,
    pub mean_alpha: Vec<Complex<T>>,
    pub stderr_re: Vec<T>,
    pub stderr_im: Vec<T>,
    pub mean_alphaplus_alpha: Vec<Complex<T>>,
    pub stderr_alphaplus_alpha_re: Vec<T>,
    pub stderr_alphaplus_alpha_im: Vec<T>,
    /// `Var Re(α⁺α) + Var Im(α⁺α)`.
    pub variance_alphaplus_alpha: Vec<T>,
    pub n_alive: Vec<usize>,
    pub n_trajectories: usize,
    /// Divergence times of the trajectories that diverged, by trajectory index.
    pub divergence_times: Vec<T>,
    /// Set when any trajectory diverged, so that later means are over a
    /// biased (surviving) subset.
    pub bias_warning: bool,
    /// First recorded time at which no trajectory survived; the series
    /// stops before it.
    pub truncated_at: Option<T>,
}

impl<T: Real> MomentSeries<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `t,re_mean_alpha,im_mean_alpha,stderr_re,stderr_im,re_mean_ap_a,im_mean_ap_a,n_alive`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,re_mean_alpha,im_mean_alpha,stderr_re,stderr_im,re_mean_ap_a,im_mean_ap_a,n_alive")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                self.times[k],
                self.mean_alpha[k].re,
                self.mean_alpha[k].im,
                self.stderr_re[k],
                self.stderr_im[k],
                self.mean_alphaplus_alpha[k].re,
                self.mean_alphaplus_alpha[k].im,
                self.n_alive[k]
            )?;
        }
        Ok(())
    }
}

/// Run `cfg.n_trajectories` trajectories of `model` and reduce them to
/// per-time means and standard errors.
pub fn run_ensemble<T: Real>(model: &KerrModel<T>, cfg: &EnsembleConfig<T>) -> Result<MomentSeries<T>> {
    cfg.validate()?;
    let steps = cfg.record_steps()?;
    let n_slots = steps.len();
    let n_chunks = cfg.n_trajectories.div_ceil(CHUNK);

    let chunks: Vec<Result<(Vec<SlotAcc<T>>, Vec<T>)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![SlotAcc::default(); n_slots];
            let mut div = Vec::new();
            let end = ((c + 1) * CHUNK).min(cfg.n_trajectories);
            for i in c * CHUNK..end {
                let d = run_trajectory(model, cfg, &steps, i as u64, |s, p| acc[s].push(p))?;
                div.extend(d);
            }
            Ok((acc, div))
        })
        .collect();

    let mut total = vec![SlotAcc::default(); n_slots];
    let mut divergence_times = Vec::new();
    for chunk in chunks {
        let (acc, div) = chunk?;
        for (t, a) in total.iter_mut().zip(&acc) {
            t.merge(a);
        }
        divergence_times.extend(div);
    }

    let mut series = MomentSeries {
        times: Vec::with_capacity(n_slots),
        mean_alpha: Vec::with_capacity(n_slots),
        stderr_re: Vec::with_capacity(n_slots),
        stderr_im: Vec::with_capacity(n_slots),
        mean_alphaplus_alpha: Vec::with_capacity(n_slots),
        stderr_alphaplus_alpha_re: Vec::with_capacity(n_slots),
        stderr_alphaplus_alpha_im: Vec::with_capacity(n_slots),
        variance_alphaplus_alpha: Vec::with_capacity(n_slots),
        n_alive: Vec::with_capacity(n_slots),
        n_trajectories: cfg.n_trajectories,
        bias_warning: !divergence_times.is_empty(),
        divergence_times,
        truncated_at: None,
    };
    for (s, acc) in steps.iter().zip(&total) {
        let t = cfg.dt * T::from_usize_lossy(*s);
        if acc.a_re.n == 0 {
            series.truncated_at = Some(t);
            break;
        }
        series.times.push(t);
        series.mean_alpha.push(Complex::new(acc.a_re.mean, acc.a_im.mean));
        series.stderr_re.push(acc.a_re.stderr());
        series.stderr_im.push(acc.a_im.stderr());
        series.mean_alphaplus_alpha.push(Complex::new(acc.p_re.mean, acc.p_im.mean));
        series.stderr_alphaplus_alpha_re.push(acc.p_re.stderr());
        series.stderr_alphaplus_alpha_im.push(acc.p_im.stderr());
        series.variance_alphaplus_alpha.push(acc.p_re.variance() + acc.p_im.variance());
        series.n_alive.push(acc.a_re.n);
    }
    Ok(series)
}

/// `⟨α⁺α⟩_S` over time with its spread and a trend test on the variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductMoments<T> {
    pub times: Vec<T>,
    pub mean: Vec<Complex<T>>,
    pub stderr_re: Vec<T>,
    pub stderr_im: Vec<T>,
    pub variance: Vec<T>,
    pub n_alive: Vec<usize>,
    /// Mann–Kendall on `variance` at times after `t = 0`.
    pub variance_trend: MannKendall,
}

pub fn product_moment_series<T: Real>(model: &KerrModel<T>, cfg: &EnsembleConfig<T>) -> Result<ProductMoments<T>> {
    let s = run_ensemble(model, cfg)?;
    let tail: Vec<f64> = s
        .variance_alphaplus_alpha
        .iter()
        .zip(&s.times)
        .filter(|(_, t)| **t > T::zero())
        .map(|(v, _)| v.to_f64_lossy())
        .collect();
    Ok(ProductMoments {
        variance_trend: mann_kendall(&tail),
        times: s.times,
        mean: s.mean_alphaplus_alpha,
        stderr_re: s.stderr_alphaplus_alpha_re,
        stderr_im: s.stderr_alphaplus_alpha_im,
        variance: s.variance_alphaplus_alpha,
        n_alive: s.n_alive,
    })
}
