//! Gauss–Legendre rules.

use crate::scalar::Real;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[n - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule on `[a, b]`: `panels` equal panels of `n` nodes each.
pub fn composite_gauss_legendre<T: Real>(a: T, b: T, panels: usize, n: usize) -> Vec<(T, T)> {
    let (x, w) = gauss_legendre::<T>(n);
    let h = (b - a) / T::from_usize_lossy(panels.max(1));
    let half = T::lit(0.5) * h;
    let mut out = Vec::with_capacity(panels * n);
    for p in 0..panels.max(1) {
        let mid = a + h * (T::from_usize_lossy(p) + T::lit(0.5));
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + half * *xi, half * *wi));
        }
    }
    out
}
