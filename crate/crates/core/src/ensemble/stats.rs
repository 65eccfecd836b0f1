use serde::Serialize;

use crate::scalar::Real;

/// Streaming mean and second central moment (Welford), mergeable with
/// Chan's pairwise update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Welford<T> {
    pub n: usize,
    pub mean: T,
    pub m2: T,
}

impl<T: Real> Welford<T> {
    pub fn new() -> Self {
        Self {
            n: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: T) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / T::from_usize_lossy(self.n);
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let na = T::from_usize_lossy(self.n);
        let nb = T::from_usize_lossy(other.n);
        let n = na + nb;
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.n += other.n;
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> T {
        if self.n < 2 {
            T::nan()
        } else {
            self.m2 / T::from_usize_lossy(self.n - 1)
        }
    }

    /// `√(variance / n)`.
    pub fn stderr(&self) -> T {
        (self.variance() / T::from_usize_lossy(self.n)).sqrt()
    }
}

/// Mann–Kendall test for a monotone upward trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannKendall {
    pub n: usize,
    pub s: i64,
    pub z: f64,
    /// One-sided `z > 1.645`.
    pub increasing_at_95: bool,
}

pub fn mann_kendall(xs: &[f64]) -> MannKendall {
    let n = xs.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += match xs[j].partial_cmp(&xs[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let nf = n as f64;
    let var = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
    let z = if var <= 0.0 {
        0.0
    } else if s > 0 {
        (s as f64 - 1.0) / var.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / var.sqrt()
    } else {
        0.0
    };
    MannKendall {
        n,
        s,
        z,
        increasing_at_95: z > 1.644_853_626_951_472_2,
    }
}

/// Median of `n_total` event times of which only `events` were observed,
/// the rest being right-censored beyond the observation window. `None`
/// when half or more are censored.
pub fn censored_median<T: Real>(events: &[T], n_total: usize) -> Option<T> {
    if n_total == 0 || 2 * events.len() < n_total + 1 {
        return None;
    }
    let mut v = events.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let half = T::lit(0.5);
    if n_total % 2 == 1 {
        Some(v[n_total / 2])
    } else {
        let hi = n_total / 2;
        if hi < v.len() {
            Some(half * (v[hi - 1] + v[hi]))
        } else {
            None
        }
    }
}
