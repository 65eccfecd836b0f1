use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::scalar::{reduce_period, Real};

/// Default upper limit on `N_max`.
pub const DEFAULT_FOCK_CAP: usize = 4096;

/// Truncated number-basis amplitudes `c_0..=c_{n_max}` of a pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector<T> {
    amplitudes: Vec<Complex<T>>,
}

/// `⌈|α₀|² + 10|α₀| + 20⌉`; the Poisson tail beyond it is below `1e-12`
/// for `|α₀| ≤ 6`.
pub fn truncation_for<T: Real>(alpha0: Complex<T>) -> usize {
    let r = alpha0.norm().to_f64_lossy();
    if !r.is_finite() {
        return usize::MAX;
    }
    (r * r + 10.0 * r + 20.0).ceil() as usize
}

impl<T: Real> FockVector<T> {
    pub fn from_amplitudes(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(invalid("amplitudes", "need at least one level"));
        }
        Ok(Self { amplitudes })
    }

    pub fn vacuum() -> Self {
        Self {
            amplitudes: vec![Complex::new(T::one(), T::zero())],
        }
    }

    /// Coherent state `|α₀⟩`, truncated at [`truncation_for`].
    pub fn coherent(alpha0: Complex<T>) -> Result<Self> {
        Self::coherent_with_cap(alpha0, DEFAULT_FOCK_CAP)
    }

    pub fn coherent_with_cap(alpha0: Complex<T>, cap: usize) -> Result<Self> {
        let n_max = truncation_for(alpha0);
        if n_max > cap {
            return Err(Error::TruncationCap { required: n_max, cap });
        }
        let zero = Complex::new(T::zero(), T::zero());
        if alpha0 == zero {
            let mut amplitudes = vec![zero; n_max + 1];
            amplitudes[0] = Complex::new(T::one(), T::zero());
            return Ok(Self { amplitudes });
        }
        // log|c_n| = −|α₀|²/2 + n log|α₀| − ½ log n!
        let half = T::lit(0.5);
        let log_r = alpha0.norm().ln();
        let theta = alpha0.arg();
        let mut log_fact = T::zero();
        let mut amplitudes = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let nf = T::from_usize_lossy(n);
            if n > 0 {
                log_fact += nf.ln();
            }
            let log_mag = -half * alpha0.norm_sqr() + nf * log_r - half * log_fact;
            amplitudes.push(Complex::from_polar(log_mag.exp(), nf * theta));
        }
        Ok(Self { amplitudes })
    }

    pub fn n_max(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr())
    }

    /// `⟨self|other⟩`; levels missing from the shorter vector count as zero.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// `a·self + b·other`, padded to the longer truncation.
    pub fn combine(&self, a: Complex<T>, other: &Self, b: Complex<T>) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        let len = self.amplitudes.len().max(other.amplitudes.len());
        let amplitudes = (0..len)
            .map(|n| {
                let x = self.amplitudes.get(n).copied().unwrap_or(zero);
                let y = other.amplitudes.get(n).copied().unwrap_or(zero);
                x * a + y * b
            })
            .collect();
        Self { amplitudes }
    }

    /// `a†ψ`, one level longer.
    fn raised(&self) -> Self {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() + 1);
        amplitudes.push(Complex::new(T::zero(), T::zero()));
        for (n, c) in self.amplitudes.iter().enumerate() {
            amplitudes.push(*c * T::from_usize_lossy(n + 1).sqrt());
        }
        Self { amplitudes }
    }

    /// Quarter-period superposition `(1−i)/2 |α₀⟩ + (1+i)/2 |−α₀⟩`.
    pub fn quarter_period_cat(alpha0: Complex<T>) -> Result<Self> {
        let plus = Self::coherent(alpha0)?;
        let minus = Self::coherent(-alpha0)?;
        let h = T::lit(0.5);
        Ok(plus.combine(Complex::new(h, -h), &minus, Complex::new(h, h)))
    }
}

/// `e^{−i n² μ t}` applied to the coherent amplitudes of `|α₀⟩`.
pub fn fock_evolve<T: Real>(alpha0: Complex<T>, mu: T, t: T) -> Result<FockVector<T>> {
    fock_evolve_with_cap(alpha0, mu, t, DEFAULT_FOCK_CAP)
}

pub fn fock_evolve_with_cap<T: Real>(alpha0: Complex<T>, mu: T, t: T, cap: usize) -> Result<FockVector<T>> {
    if !(mu > T::zero()) || !mu.is_finite() {
        return Err(invalid("mu", "must be finite and > 0"));
    }
    if !t.is_finite() {
        return Err(invalid("t", "must be finite"));
    }
    let mut psi = FockVector::coherent_with_cap(alpha0, cap)?;
    // n²μt = 2π n² f with f = t/period reduced to [0, 1); only the
    // fractional part of n² f matters.
    let period = T::TAU() / mu;
    let f = reduce_period(t, period) / period;
    for (n, c) in psi.amplitudes.iter_mut().enumerate() {
        let n2 = T::from_usize_lossy(n * n);
        let frac = (n2 * f).fract();
        *c = *c * Complex::from_polar(T::one(), -T::TAU() * frac);
    }
    Ok(psi)
}

/// `⟨ψ|â|ψ⟩ = Σ c*_n c_{n+1} √(n+1)`.
pub fn mean_a_fock<T: Real>(psi: &FockVector<T>) -> Complex<T> {
    let c = psi.amplitudes();
    c.windows(2)
        .enumerate()
        .fold(Complex::new(T::zero(), T::zero()), |acc, (n, w)| {
            acc + w[0].conj() * w[1] * T::from_usize_lossy(n + 1).sqrt()
        })
}

/// `⟨ψ|âⁿ â†ᵐ|ψ⟩`, evaluated as `⟨(â†)ⁿψ | (â†)ᵐψ⟩`.
pub fn antinormal_moment<T: Real>(psi: &FockVector<T>, n: usize, m: usize) -> Complex<T> {
    let raise = |k: usize| (0..k).fold(psi.clone(), |acc, _| acc.raised());
    raise(n).inner(&raise(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::mean_a_exact;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn coherent_state_normalized_with_small_tail() {
        for r in [0.0, 0.5, 1.0, 3.0, 6.0] {
            let psi = FockVector::coherent(c(r, 0.0)).unwrap();
            assert!((psi.norm_sqr() - 1.0).abs() < 1e-12, "r={r}");
            assert_eq!(psi.n_max(), (r * r + 10.0 * r + 20.0f64).ceil() as usize);
        }
        let psi = FockVector::coherent(c(-1.2, 2.0)).unwrap();
        assert!((mean_a_fock(&psi) - c(-1.2, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn truncation_cap_is_enforced() {
        assert!(matches!(
            FockVector::<f64>::coherent_with_cap(c(5.0, 0.0), 50),
            Err(Error::TruncationCap { required: 95, cap: 50 })
        ));
        assert!(fock_evolve(c(80.0, 0.0), 1.0, 0.1).is_err());
    }

    #[test]
    fn half_period_gives_minus_alpha() {
        for a0 in [c(1.0, 0.0), c(0.4, 1.3)] {
            let psi = fock_evolve(a0, 1.0, PI).unwrap();
            let target = FockVector::coherent(-a0).unwrap();
            assert!((psi.fidelity(&target) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn quarter_period_cat() {
        for a0 in [c(1.0, 0.0), c(3.0, 0.0)] {
            let psi = fock_evolve(a0, 2.0, PI / 4.0).unwrap();
            let cat = FockVector::quarter_period_cat(a0).unwrap();
            assert!(psi.fidelity(&cat) >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn periodic_in_phases() {
        let a = fock_evolve(c(1.0, 0.5), 1.0, 0.3).unwrap();
        let b = fock_evolve(c(1.0, 0.5), 1.0, 0.3 + 2.0 * PI).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn mean_a_fock_matches_closed_form() {
        assert_eq!(mean_a_fock(&FockVector::<f64>::vacuum()), c(0.0, 0.0));
        let psi = FockVector::coherent(c(2.0, 0.0)).unwrap();
        assert!((mean_a_fock(&psi) - c(2.0, 0.0)).norm() < 1e-12);
        let psi = fock_evolve(c(1.0, 0.0), 1.0, 0.3).unwrap();
        assert!((mean_a_fock(&psi) - mean_a_exact(c(1.0, 0.0), 1.0, 0.3)).norm() < 1e-10);
        for t in [-2.0, 0.7, 5.1] {
            let psi = fock_evolve(c(-0.5, 1.5), 0.8, t).unwrap();
            assert!((mean_a_fock(&psi) - mean_a_exact(c(-0.5, 1.5), 0.8, t)).norm() < 1e-10);
        }
    }

    #[test]
    fn antinormal_moments() {
        let vac = FockVector::<f64>::vacuum();
        assert_eq!(antinormal_moment(&vac, 1, 0), c(0.0, 0.0));
        assert!((antinormal_moment(&vac, 1, 1) - 1.0).norm() < 1e-15);
        assert!((antinormal_moment(&vac, 2, 2) - 2.0).norm() < 1e-15);
        let a0 = c(1.5, -0.5);
        for t in [0.0, 0.3, 1.1, 2.0, 4.0] {
            let psi = fock_evolve(a0, 1.0, t).unwrap();
            assert!((antinormal_moment(&psi, 1, 1) - (a0.norm_sqr() + 1.0)).norm() < 1e-11);
        }
        // ⟨a⟩ and ⟨a²a†⟩ on a coherent state.
        let psi = FockVector::coherent(a0).unwrap();
        assert!((antinormal_moment(&psi, 1, 0) - a0).norm() < 1e-12);
        let expect = a0 * (a0.norm_sqr() + 2.0);
        assert!((antinormal_moment(&psi, 2, 1) - expect).norm() < 1e-11);
    }
}
