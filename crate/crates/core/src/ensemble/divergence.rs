use std::io::{self, Write};

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use super::stats::censored_median;
use super::{run_trajectory, EnsembleConfig, InitialMode};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sde::KerrModel;

pub const MIN_DIVERGENCE_TRAJECTORIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRow<T> {
    pub beta: Complex<T>,
    pub n_trajectories: usize,
    pub n_diverged: usize,
    /// Fraction diverged by `t_final`.
    pub fraction: T,
    /// Median over all trajectories, survivors counting as beyond
    /// `t_final`; `None` when fewer than half diverged.
    pub median_time: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceTable<T> {
    pub t_final: T,
    pub threshold: T,
    pub rows: Vec<DivergenceRow<T>>,
}

impl<T: Real> DivergenceTable<T> {
    /// Whether the median divergence time never increases along `rows`
    /// ordered by `|β|`, an absent median counting as `+∞`.
    pub fn median_non_increasing_in_beta(&self) -> bool {
        let mut rows: Vec<&DivergenceRow<T>> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.beta.norm().partial_cmp(&b.beta.norm()).unwrap_or(std::cmp::Ordering::Equal));
        let key = |r: &DivergenceRow<T>| r.median_time.unwrap_or_else(T::infinity);
        rows.windows(2).all(|w| key(w[1]) <= key(w[0]))
    }

    /// `beta_re,beta_im,fraction,median_time`; an absent median is `inf`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "beta_re,beta_im,fraction,median_time")?;
        for r in &self.rows {
            let median = r.median_time.map_or_else(|| "inf".to_string(), |m| m.to_string());
            writeln!(w, "{},{},{},{}", r.beta.re, r.beta.im, r.fraction, median)?;
        }
        Ok(())
    }
}

/// For every `β`, run `cfg` from the fixed start `(β, β*)` up to the first
/// threshold crossing. All `β` share the same noise streams, so the rows
/// are compared under common random numbers.
pub fn divergence_statistics<T: Real>(
    model: &KerrModel<T>,
    betas: &[Complex<T>],
    cfg: &EnsembleConfig<T>,
) -> Result<DivergenceTable<T>> {
    cfg.validate()?;
    if cfg.n_trajectories < MIN_DIVERGENCE_TRAJECTORIES {
        return Err(Error::TooFewSamples {
            needed: MIN_DIVERGENCE_TRAJECTORIES,
            got: cfg.n_trajectories,
        });
    }
    // Only the final step matters here.
    let steps = vec![0, cfg.n_steps()?];
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let c = EnsembleConfig {
            initial_mode: InitialMode::FixedBeta(beta),
            ..*cfg
        };
        let times: Vec<Option<T>> = (0..c.n_trajectories as u64)
            .into_par_iter()
            .map(|i| run_trajectory(model, &c, &steps, i, |_, _| {}))
            .collect::<Result<_>>()?;
        let events: Vec<T> = times.into_iter().flatten().collect();
        rows.push(DivergenceRow {
            beta,
            n_trajectories: c.n_trajectories,
            n_diverged: events.len(),
            fraction: T::from_usize_lossy(events.len()) / T::from_usize_lossy(c.n_trajectories),
            median_time: censored_median(&events, c.n_trajectories),
        });
    }
    Ok(DivergenceTable {
        t_final: cfg.t_final,
        threshold: cfg.divergence_threshold,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Integrator;

    fn base(t_final: f64, n: usize) -> EnsembleConfig<f64> {
        EnsembleConfig {
            dt: 1e-3,
            integrator: Integrator::Pathwise,
            divergence_threshold: 1e3,
            master_seed: 11,
            ..EnsembleConfig::new(n, InitialMode::FixedBeta(Complex::new(0.0, 0.0)), t_final)
        }
    }

    #[test]
    fn origin_never_diverges() {
        let m = KerrModel::q(1.0).unwrap();
        let t = divergence_statistics(&m, &[Complex::new(0.0, 0.0)], &base(5.0, 100)).unwrap();
        assert_eq!(t.rows[0].n_diverged, 0);
        assert_eq!(t.rows[0].median_time, None);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "beta_re,beta_im,fraction,median_time\n0,0,0,inf\n");
    }

    #[test]
    fn too_few_trajectories() {
        let m = KerrModel::q(1.0).unwrap();
        assert!(matches!(
            divergence_statistics(&m, &[Complex::new(1.0, 0.0)], &base(1.0, 99)),
            Err(Error::TooFewSamples { needed: 100, got: 99 })
        ));
    }

    #[test]
    fn larger_amplitude_diverges_sooner() {
        let m = KerrModel::q(1.0).unwrap();
        let betas = [Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)];
        let t = divergence_statistics(&m, &betas, &base(4.0, 200)).unwrap();
        assert!(t.rows[1].fraction >= t.rows[0].fraction);
        assert!(t.median_non_increasing_in_beta());
    }
}
