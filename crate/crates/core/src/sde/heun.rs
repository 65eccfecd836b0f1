use std::io::{self, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::pathwise::PathwiseSolution;
use super::{KerrModel, PhasePoint};
use crate::noise::NoisePath;
use crate::scalar::Real;

/// One Stratonovich Heun (predictor-corrector) step.
///
/// `eta = (η, η⁺)` are the noise increments of the step, so the noise term
/// of the update is `(α·η, α⁺·η⁺)`:
///
/// ```text
/// p̃  = p + B(p)Δt + C(p)η
/// p' = p + ½[B(p) + B(p̃)]Δt + ½[C(p) + C(p̃)]η
/// ```
///
/// The result may be non-finite; callers treat that as a divergence.
#[inline]
pub fn heun_step<T: Real>(
    model: &KerrModel<T>,
    p: &PhasePoint<T>,
    eta: (Complex<T>, Complex<T>),
    dt: T,
) -> PhasePoint<T> {
    let (b_a, b_ap) = model.drift(p);
    let pred = PhasePoint {
        alpha: p.alpha + b_a * dt + p.alpha * eta.0,
        alpha_plus: p.alpha_plus + b_ap * dt + p.alpha_plus * eta.1,
    };
    let (c_a, c_ap) = model.drift(&pred);
    let half = T::lit(0.5);
    PhasePoint {
        alpha: p.alpha + (b_a + c_a) * (half * dt) + (p.alpha + pred.alpha) * eta.0 * half,
        alpha_plus: p.alpha_plus + (b_ap + c_ap) * (half * dt) + (p.alpha_plus + pred.alpha_plus) * eta.1 * half,
    }
}

/// Discretisation used to advance a trajectory through its noise path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Stratonovich Heun stepping of the SDEs.
    Heun,
    /// Closed-form solution driven by the running noise integrals, with the
    /// inner time integral by the trapezoid rule.
    Pathwise,
}

/// Incremental state of one trajectory under either integrator.
#[derive(Debug, Clone)]
pub enum Propagator<T> {
    Heun {
        model: KerrModel<T>,
        point: PhasePoint<T>,
        dt: T,
    },
    Pathwise(PathwiseSolution<T>),
}

impl<T: Real> Propagator<T> {
    pub fn new(integrator: Integrator, model: &KerrModel<T>, initial: PhasePoint<T>, dt: T) -> Self {
        match integrator {
            Integrator::Heun => Propagator::Heun {
                model: *model,
                point: initial,
                dt,
            },
            Integrator::Pathwise => Propagator::Pathwise(PathwiseSolution::new(model, initial, dt)),
        }
    }

    #[inline]
    pub fn advance(&mut self, eta: (Complex<T>, Complex<T>)) -> PhasePoint<T> {
        match self {
            Propagator::Heun { model, point, dt } => {
                *point = heun_step(model, point, eta, *dt);
                *point
            }
            Propagator::Pathwise(sol) => {
                sol.advance(eta);
                sol.point()
            }
        }
    }
}

/// A sampled trajectory. `points[k]` belongs to `times[k]`; once the
/// trajectory diverges no further points are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub points: Vec<PhasePoint<T>>,
    pub divergence_time: Option<T>,
    pub divergence_flag: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn point_at(&self, k: usize) -> Option<&PhasePoint<T>> {
        self.points.get(k)
    }

    pub fn last(&self) -> &PhasePoint<T> {
        self.points.last().expect("trajectory holds its initial point")
    }

    /// `t, re_alpha, im_alpha, re_alpha_plus, im_alpha_plus, diverged`;
    /// rows past the divergence carry `nan` amplitudes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,re_alpha,im_alpha,re_alpha_plus,im_alpha_plus,diverged")?;
        for (k, t) in self.times.iter().enumerate() {
            match self.points.get(k) {
                Some(p) => writeln!(
                    out,
                    "{t},{:e},{:e},{:e},{:e},0",
                    p.alpha.re, p.alpha.im, p.alpha_plus.re, p.alpha_plus.im
                )?,
                None => writeln!(out, "{t},nan,nan,nan,nan,1")?,
            }
        }
        Ok(())
    }
}

/// Heun integration of the SDEs along `path`, sampled at every step.
pub fn integrate_trajectory<T: Real>(
    model: &KerrModel<T>,
    initial: PhasePoint<T>,
    path: &NoisePath<T>,
    divergence_threshold: T,
) -> Trajectory<T> {
    integrate_with(Integrator::Heun, model, initial, path, divergence_threshold)
}

pub fn integrate_with<T: Real>(
    integrator: Integrator,
    model: &KerrModel<T>,
    initial: PhasePoint<T>,
    path: &NoisePath<T>,
    divergence_threshold: T,
) -> Trajectory<T> {
    let n = path.len();
    let times: Vec<T> = (0..=n).map(|k| path.time(k)).collect();
    let mut points = Vec::with_capacity(n + 1);
    points.push(initial);
    let mut divergence_time = None;
    if initial.is_divergent(divergence_threshold) {
        divergence_time = Some(T::zero());
        points.clear();
    } else {
        let mut prop = Propagator::new(integrator, model, initial, path.dt);
        for (k, &eta) in path.increments.iter().enumerate() {
            let p = prop.advance(eta);
            if p.is_divergent(divergence_threshold) {
                divergence_time = Some(times[k + 1]);
                break;
            }
            points.push(p);
        }
    }
    Trajectory {
        times,
        divergence_flag: divergence_time.is_some(),
        points,
        divergence_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_noise_path, NoiseConfig};
    use crate::sde::{pathwise_exact_solution, Representation};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn zero_noise_unit_product_is_fixed() {
        let m = KerrModel::q(1.0).unwrap();
        let beta = c(1.0, 0.0);
        let p = heun_step(&m, &PhasePoint::physical(beta), (c(0.0, 0.0), c(0.0, 0.0)), 1e-3);
        assert!((p.alpha - beta).norm() < 1e-15);

        let path = NoisePath::zeros(1.0, 1e-3, Representation::Q, 1000);
        let beta = Complex::from_polar(1.0, 0.4);
        let traj = integrate_trajectory(&m, PhasePoint::physical(beta), &path, 1e6);
        assert!(!traj.divergence_flag);
        for p in &traj.points {
            assert!((p.alpha - beta).norm() < 1e-14);
        }
    }

    #[test]
    fn vanishing_mu_leaves_point_unchanged() {
        let m = KerrModel::q(1e-300).unwrap();
        let p0 = PhasePoint::new(c(0.3, 0.2), c(-1.0, 2.0));
        let p = heun_step(&m, &p0, (c(0.0, 0.0), c(0.0, 0.0)), 1e-2);
        assert!((p.alpha - p0.alpha).norm() < 1e-15);
        assert!((p.alpha_plus - p0.alpha_plus).norm() < 1e-15);
    }

    #[test]
    fn zero_noise_rotation_matches_exponential() {
        let mu = 1.3;
        let m = KerrModel::q(mu).unwrap();
        let beta = c(0.8, -1.1);
        let dt = 1e-4;
        let n = 10_000;
        let path = NoisePath::zeros(mu, dt, Representation::Q, n);
        let traj = integrate_trajectory(&m, PhasePoint::physical(beta), &path, 1e6);
        let omega = 2.0 * mu * (beta.norm_sqr() - 1.0);
        for k in (0..=n).step_by(500) {
            let t = traj.times[k];
            let exact = beta * Complex::from_polar(1.0, -omega * t);
            let got = traj.points[k].alpha;
            // Global phase error is O(dt²): the predictor inflates α⁺α by (ωdt)².
            assert!((got - exact).norm() < 1e-6, "t={t}: {got} vs {exact}");
            assert!((got.norm() - beta.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn drift_only_conserves_product() {
        let m = KerrModel::q(1.0).unwrap();
        let dt = 1e-5;
        let path = NoisePath::zeros(1.0, dt, Representation::Q, 100_000);
        let p0 = PhasePoint::physical(c(1.5, 0.7));
        let traj = integrate_trajectory(&m, p0, &path, 1e6);
        let n0 = p0.product();
        for p in traj.points.iter().step_by(1000) {
            assert!((p.product() - n0).norm() < 1e-8);
        }
    }

    #[test]
    fn local_error_against_pathwise_step() {
        // One step of Heun against the closed form on the same increment.
        // Increments scale as √Δt, so the local discrepancy is O(Δt^{3/2}).
        let m = KerrModel::q(1.0).unwrap();
        let beta = c(0.6, 0.3);
        let p0 = PhasePoint::physical(beta);
        let (g, gp) = (0.8, -1.3);
        let mut errs = vec![];
        let dts = [1e-2, 1e-3, 1e-4];
        for &dt in &dts {
            let (s, sp) = crate::noise::increment_scales(1.0, dt, Representation::Q);
            let eta = (s * g, sp * gp);
            let path = NoisePath::from_increments(1.0, dt, Representation::Q, vec![eta]);
            let h = heun_step(&m, &p0, eta, dt);
            let e = pathwise_exact_solution(&m, beta, &path, 1).unwrap();
            errs.push((h.alpha - e.alpha).norm() + (h.alpha_plus - e.alpha_plus).norm());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log10();
            assert!(order > 1.4, "local order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn heun_tracks_pathwise_on_fine_grid() {
        let m = KerrModel::q(1.0).unwrap();
        let dt = 1e-5;
        let cfg = NoiseConfig::new(1.0, dt, Representation::Q, 2024, 0).unwrap();
        let path = sample_noise_path(&cfg, 10_000).unwrap();
        let beta = c(0.001, 0.1);
        let traj = integrate_trajectory(&m, PhasePoint::physical(beta), &path, 1e6);
        let exact = pathwise_exact_solution(&m, beta, &path, 10_000).unwrap();
        let got = traj.last().alpha;
        let rel = (got - exact.alpha).norm() / exact.alpha.norm();
        assert!(rel < 1e-4, "relative error {rel}");
    }

    #[test]
    fn divergence_is_sticky_and_truncates() {
        let m = KerrModel::q(1.0).unwrap();
        let cfg = NoiseConfig::new(1.0, 1e-3, Representation::Q, 5, 1).unwrap();
        let path = sample_noise_path(&cfg, 5000).unwrap();
        // A tiny threshold forces an early divergence.
        let traj = integrate_trajectory(&m, PhasePoint::physical(c(1.0, 0.0)), &path, 1.05);
        assert!(traj.divergence_flag);
        let td = traj.divergence_time.unwrap();
        assert_eq!(traj.times[traj.points.len()], td);
        assert!(traj.points.iter().all(|p| p.max_norm() <= 1.05));
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let flags: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
        let first = flags.iter().position(|f| *f == "1").unwrap();
        assert!(flags[first..].iter().all(|f| *f == "1"));
    }

    #[test]
    fn origin_is_fixed() {
        let m = KerrModel::q(1.0).unwrap();
        let cfg = NoiseConfig::new(1.0, 1e-3, Representation::Q, 5, 1).unwrap();
        let path = sample_noise_path(&cfg, 1000).unwrap();
        let traj = integrate_trajectory(&m, PhasePoint::physical(c(0.0, 0.0)), &path, 1e6);
        assert!(traj.points.iter().all(|p| p.alpha == c(0.0, 0.0)));
    }
}
