use num_complex::Complex;
use serde::Serialize;

use super::{run_ensemble, EnsembleConfig, InitialMode, MomentSeries};
use crate::analytic::{mean_a_exact, ordered_double_average, stochastic_average_resummed};
use crate::error::Result;
use crate::scalar::Real;
use crate::sde::KerrModel;

/// Relative tolerance of the `l` series in branch (c).
const SERIES_TOLERANCE: f64 = 1e-12;

/// The ensemble started at the fixed point `(α₀, α₀*)`, compared with the
/// re-summed fixed-start average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedBetaBranch<T> {
    pub series: MomentSeries<T>,
    pub resummed: Vec<Complex<T>>,
    /// First recorded time where either component is more than 4 standard
    /// errors from the re-summed curve.
    pub first_disagreement: Option<T>,
}

/// The ensemble with starts drawn from `Q₀`, compared with the exact `⟨â(t)⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledBranch<T> {
    pub series: MomentSeries<T>,
    pub exact: Vec<Complex<T>>,
    pub divergence_fraction: T,
    pub first_divergence_time: Option<T>,
    /// First recorded time where the estimate is more than 4 standard errors
    /// from the exact value, or its standard error is not finite.
    pub blowup_time: Option<T>,
    /// Recorded times where the estimator cannot be trusted: the Q₀ integral
    /// of the fixed-start average does not exist (`cos 2μt ≤ 0`) or some
    /// trajectories have been dropped.
    pub unreliable_times: Vec<T>,
}

/// The Q₀-first double series against the exact `⟨â(t)⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderedBranch<T> {
    pub times: Vec<T>,
    pub value: Vec<Complex<T>>,
    pub exact: Vec<Complex<T>>,
    pub max_deviation: T,
    pub all_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragingOrderReport<T> {
    pub alpha0: Complex<T>,
    pub mu: T,
    pub fixed_beta: FixedBetaBranch<T>,
    pub sampled: SampledBranch<T>,
    pub ordered: OrderedBranch<T>,
}

fn outside_4_sigma<T: Real>(s: &MomentSeries<T>, k: usize, want: Complex<T>) -> bool {
    let d = s.mean_alpha[k] - want;
    let four = T::lit(4.0);
    let (se_re, se_im) = (s.stderr_re[k], s.stderr_im[k]);
    !se_re.is_finite() || !se_im.is_finite() || d.re.abs() > four * se_re || d.im.abs() > four * se_im
}

/// Run the three averaging orders for `|α₀⟩` under the Q-representation
/// SDEs. `cfg.initial_mode` is ignored: branch (a) starts at `(α₀, α₀*)`,
/// branch (b) samples `Q₀`.
pub fn averaging_order_experiment<T: Real>(alpha0: Complex<T>, mu: T, cfg: &EnsembleConfig<T>) -> Result<AveragingOrderReport<T>> {
    let model = KerrModel::q(mu)?;

    let fixed_cfg = EnsembleConfig {
        initial_mode: InitialMode::FixedBeta(alpha0),
        ..*cfg
    };
    let fixed = run_ensemble(&model, &fixed_cfg)?;
    let resummed: Vec<_> = fixed.times.iter().map(|t| stochastic_average_resummed(alpha0, mu, *t)).collect();
    let first_disagreement = (0..fixed.len())
        .find(|&k| outside_4_sigma(&fixed, k, resummed[k]))
        .map(|k| fixed.times[k]);

    let sampled_cfg = EnsembleConfig {
        initial_mode: InitialMode::SampleQ0(alpha0),
        ..*cfg
    };
    let sampled = run_ensemble(&model, &sampled_cfg)?;
    let exact: Vec<_> = sampled.times.iter().map(|t| mean_a_exact(alpha0, mu, *t)).collect();
    let blowup_time = (0..sampled.len())
        .find(|&k| outside_4_sigma(&sampled, k, exact[k]))
        .map(|k| sampled.times[k]);
    let unreliable_times = (0..sampled.len())
        .filter(|&k| {
            let t = sampled.times[k];
            (T::lit(2.0) * mu * t).cos() <= T::zero() || sampled.n_alive[k] < sampled.n_trajectories
        })
        .map(|k| sampled.times[k])
        .collect();
    let divergence_fraction =
        T::from_usize_lossy(sampled.divergence_times.len()) / T::from_usize_lossy(sampled.n_trajectories);
    let first_divergence_time = sampled.divergence_times.iter().copied().reduce(T::min);

    let times = fixed.times.clone();
    let mut value = Vec::with_capacity(times.len());
    let mut exact_c = Vec::with_capacity(times.len());
    let mut max_deviation = T::zero();
    let mut all_converged = true;
    for &t in &times {
        let r = ordered_double_average(alpha0, mu, t, T::lit(SERIES_TOLERANCE))?;
        let e = mean_a_exact(alpha0, mu, t);
        all_converged &= r.converged;
        max_deviation = max_deviation.max((r.value - e).norm());
        value.push(r.value);
        exact_c.push(e);
    }

    Ok(AveragingOrderReport {
        alpha0,
        mu,
        fixed_beta: FixedBetaBranch {
            series: fixed,
            resummed,
            first_disagreement,
        },
        sampled: SampledBranch {
            series: sampled,
            exact,
            divergence_fraction,
            first_divergence_time,
            blowup_time,
            unreliable_times,
        },
        ordered: OrderedBranch {
            times,
            value,
            exact: exact_c,
            max_deviation,
            all_converged,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Integrator;

    #[test]
    fn three_branches() {
        let a0 = Complex::new(1.0f64, 0.0);
        let cfg = EnsembleConfig {
            dt: 1e-3,
            record_stride: 100,
            integrator: Integrator::Pathwise,
            master_seed: 3,
            ..EnsembleConfig::new(400, InitialMode::FixedBeta(a0), 2.0)
        };
        let r = averaging_order_experiment(a0, 1.0, &cfg).unwrap();
        assert!(r.ordered.all_converged);
        assert!(r.ordered.max_deviation < 1e-10);
        assert_eq!(r.fixed_beta.series.times, r.ordered.times);
        // t = 1 and 2 have cos(2t) ≤ 0.
        assert!(r.sampled.unreliable_times.iter().any(|t| (*t - 1.0).abs() < 1e-9));
        assert!(r.sampled.series.mean_alpha[0] != r.fixed_beta.series.mean_alpha[0]);
    }
}
