use std::io::{self, Read, Write};

use num_complex::Complex;
use rayon::prelude::*;

use super::FockVector;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"KERRQGRD";
const FORMAT_VERSION: u32 = 1;

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]` sampled at
/// `nx × ny` points including the edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> GridSpec<T> {
    /// The square `[−extent, extent]²` with `res × res` points.
    pub fn square(extent: T, res: usize) -> Self {
        Self {
            x_min: -extent,
            x_max: extent,
            y_min: -extent,
            y_max: extent,
            nx: res,
            ny: res,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(invalid("grid", "need at least 2 points per axis"));
        }
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(invalid("grid", "corners must be finite with max > min"));
        }
        Ok(())
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::from_usize_lossy(self.nx - 1)
    }

    pub fn dy(&self) -> T {
        (self.y_max - self.y_min) / T::from_usize_lossy(self.ny - 1)
    }

    pub fn x(&self, ix: usize) -> T {
        self.x_min + self.dx() * T::from_usize_lossy(ix)
    }

    pub fn y(&self, iy: usize) -> T {
        self.y_min + self.dy() * T::from_usize_lossy(iy)
    }
}

/// Sampled Q function; `values[iy * nx + ix]` holds `Q(x_ix + i y_iy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QGrid<T> {
    pub spec: GridSpec<T>,
    pub values: Vec<T>,
    pub units: String,
}

impl<T: Real> QGrid<T> {
    pub fn get(&self, ix: usize, iy: usize) -> T {
        self.values[iy * self.spec.nx + ix]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(*v))
    }

    /// Largest value on the boundary of the rectangle.
    pub fn boundary_max(&self) -> T {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut m = T::zero();
        for ix in 0..nx {
            m = m.max(self.get(ix, 0)).max(self.get(ix, ny - 1));
        }
        for iy in 0..ny {
            m = m.max(self.get(0, iy)).max(self.get(nx - 1, iy));
        }
        m
    }

    /// Trapezoid rule for `∫ f(α) Q(α) d²α` over the rectangle.
    pub fn integrate_with(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Complex<T> {
        let s = &self.spec;
        let half = T::lit(0.5);
        let mut acc = Complex::new(T::zero(), T::zero());
        for iy in 0..s.ny {
            let wy = if iy == 0 || iy == s.ny - 1 { half } else { T::one() };
            let y = s.y(iy);
            for ix in 0..s.nx {
                let wx = if ix == 0 || ix == s.nx - 1 { half } else { T::one() };
                acc += f(Complex::new(s.x(ix), y)) * (self.get(ix, iy) * wx * wy);
            }
        }
        acc * (s.dx() * s.dy())
    }

    /// `∫ Q d²α` over the rectangle.
    pub fn integral(&self) -> T {
        self.integrate_with(|_| Complex::new(T::one(), T::zero())).re
    }

    /// Interior strict local maxima (8-neighbour) above `min_fraction` of the
    /// global maximum, refined by a quadratic fit to the 3×3 neighbourhood.
    /// Sorted by decreasing value.
    pub fn local_maxima(&self, min_fraction: T) -> Vec<(Complex<T>, T)> {
        let s = &self.spec;
        let floor = self.max_value() * min_fraction;
        let mut out = Vec::new();
        for iy in 1..s.ny - 1 {
            for ix in 1..s.nx - 1 {
                let v = self.get(ix, iy);
                if v < floor {
                    continue;
                }
                let mut is_max = true;
                'nb: for dy in [-1isize, 0, 1] {
                    for dx in [-1isize, 0, 1] {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let n = self.get((ix as isize + dx) as usize, (iy as isize + dy) as usize);
                        // Ties broken towards the lower index so plateaus yield one point.
                        let earlier = dy < 0 || (dy == 0 && dx < 0);
                        if n > v || (n == v && earlier) {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if !is_max {
                    continue;
                }
                let (ox, oy) = self.quadratic_offset(ix, iy);
                let pos = Complex::new(s.x(ix) + ox * s.dx(), s.y(iy) + oy * s.dy());
                out.push((pos, v));
            }
        }
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        out
    }

    /// Newton step (in grid units) to the stationary point of the quadratic
    /// interpolating the 3×3 block around `(ix, iy)`; zero unless the fit is
    /// concave, and clamped to one cell.
    fn quadratic_offset(&self, ix: usize, iy: usize) -> (T, T) {
        let f = |dx: isize, dy: isize| self.get((ix as isize + dx) as usize, (iy as isize + dy) as usize);
        let half = T::lit(0.5);
        let gx = half * (f(1, 0) - f(-1, 0));
        let gy = half * (f(0, 1) - f(0, -1));
        let hxx = f(1, 0) - f(0, 0) - f(0, 0) + f(-1, 0);
        let hyy = f(0, 1) - f(0, 0) - f(0, 0) + f(0, -1);
        let hxy = T::lit(0.25) * (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1));
        let det = hxx * hyy - hxy * hxy;
        if !(hxx < T::zero()) || !(det > T::zero()) {
            return (T::zero(), T::zero());
        }
        let ox = -(hyy * gx - hxy * gy) / det;
        let oy = -(hxx * gy - hxy * gx) / det;
        let one = T::one();
        (ox.max(-one).min(one), oy.max(-one).min(one))
    }

    /// `x,y,Q` rows, `x` fastest.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,Q")?;
        for iy in 0..self.spec.ny {
            let y = self.spec.y(iy);
            for ix in 0..self.spec.nx {
                writeln!(w, "{},{},{}", self.spec.x(ix), y, self.get(ix, iy))?;
            }
        }
        Ok(())
    }

    /// Little-endian binary matrix:
    ///
    /// ```text
    /// "KERRQGRD" | u32 version | u32 nx | u32 ny
    /// f64 x_min | f64 x_max | f64 y_min | f64 y_max
    /// u16 len | units (UTF-8) | nx·ny f64 values, row-major (y outer)
    /// ```
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let s = &self.spec;
        let to_u32 = |v: usize| u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "grid too large"));
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&to_u32(s.nx)?.to_le_bytes())?;
        w.write_all(&to_u32(s.ny)?.to_le_bytes())?;
        for c in [s.x_min, s.x_max, s.y_min, s.y_max] {
            w.write_all(&c.to_f64_lossy().to_le_bytes())?;
        }
        let units = self.units.as_bytes();
        let len = u16::try_from(units.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "units too long"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(units)?;
        for v in &self.values {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated grid file: {e}")))?;
            Ok(b)
        }
        if &take::<8, _>(&mut r)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let nx = u32::from_le_bytes(take(&mut r)?) as usize;
        let ny = u32::from_le_bytes(take(&mut r)?) as usize;
        let mut corners = [T::zero(); 4];
        for c in &mut corners {
            *c = T::lit(f64::from_le_bytes(take(&mut r)?));
        }
        let len = u16::from_le_bytes(take(&mut r)?) as usize;
        let mut units = vec![0u8; len];
        r.read_exact(&mut units).map_err(|e| Error::Format(format!("truncated grid file: {e}")))?;
        let units = String::from_utf8(units).map_err(|_| Error::Format("units not UTF-8".into()))?;
        let spec = GridSpec {
            x_min: corners[0],
            x_max: corners[1],
            y_min: corners[2],
            y_max: corners[3],
            nx,
            ny,
        };
        spec.validate()?;
        let count = nx.checked_mul(ny).ok_or_else(|| Error::Format("grid size overflow".into()))?;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(T::lit(f64::from_le_bytes(take(&mut r)?)));
        }
        Ok(Self { spec, values, units })
    }
}

/// `Q(β) = |⟨β|ψ⟩|²/π` with `⟨β|ψ⟩ = e^{−|β|²/2} Σ c_n β*ⁿ/√n!`.
pub fn q_value<T: Real>(psi: &FockVector<T>, beta: Complex<T>) -> T {
    let bc = beta.conj();
    let mut basis = Complex::new((-T::lit(0.5) * beta.norm_sqr()).exp(), T::zero());
    let mut overlap = Complex::new(T::zero(), T::zero());
    for (n, c) in psi.amplitudes().iter().enumerate() {
        if n > 0 {
            basis = basis * bc / T::from_usize_lossy(n).sqrt();
        }
        overlap += *c * basis;
    }
    overlap.norm_sqr() / T::PI()
}

/// Q function of `psi` sampled on `spec`; rows are evaluated in parallel.
pub fn q_function<T: Real>(psi: &FockVector<T>, spec: GridSpec<T>) -> Result<QGrid<T>> {
    spec.validate()?;
    let mut values = vec![T::zero(); spec.nx * spec.ny];
    values.par_chunks_mut(spec.nx).enumerate().for_each(|(iy, row)| {
        let y = spec.y(iy);
        for (ix, v) in row.iter_mut().enumerate() {
            *v = q_value(psi, Complex::new(spec.x(ix), y));
        }
    });
    Ok(QGrid {
        spec,
        values,
        units: "x,y: Re/Im alpha (dimensionless); Q: 1/area".to_string(),
    })
}

/// `∫ Q αⁿ α*ᵐ d²α` by the trapezoid rule on `grid`, i.e. `⟨âⁿ â†ᵐ⟩`.
///
/// Fails when the weighted integrand is not negligible on the boundary
/// (relative `1e-10`), suggesting a larger extent.
pub fn antinormal_moment_quadrature<T: Real>(grid: &QGrid<T>, n: usize, m: usize) -> Result<Complex<T>> {
    let s = &grid.spec;
    let pow = (n + m) as i32;
    let mut edge = T::zero();
    let mut edge_r = T::infinity();
    let mut edge_weighted = T::zero();
    let mut record = |ix: usize, iy: usize| {
        let r = Complex::new(s.x(ix), s.y(iy)).norm();
        let q = grid.get(ix, iy);
        edge = edge.max(q);
        edge_r = edge_r.min(r);
        edge_weighted = edge_weighted.max(q * r.powi(pow));
    };
    for ix in 0..s.nx {
        record(ix, 0);
        record(ix, s.ny - 1);
    }
    for iy in 0..s.ny {
        record(0, iy);
        record(s.nx - 1, iy);
    }
    let scale = grid.max_value().max(T::min_positive_value());
    if edge_weighted > T::lit(1e-10) * scale {
        // Gaussian tails: move the edge out until e^{−d²} reaches 1e-12.
        let ratio = (edge_weighted / scale).to_f64_lossy().max(1e-300);
        let d_now = (-ratio.ln()).max(0.0).sqrt();
        let d_need = (12.0f64 * std::f64::consts::LN_10).sqrt() + 0.5 * pow as f64;
        let suggested = edge_r.to_f64_lossy() + (d_need - d_now).max(1.0);
        return Err(Error::GridTooSmall {
            boundary_q: edge.to_f64_lossy(),
            suggested_extent: suggested.ceil(),
        });
    }
    Ok(grid.integrate_with(|a| {
        let mut v = Complex::new(T::one(), T::zero());
        for _ in 0..n {
            v = v * a;
        }
        for _ in 0..m {
            v = v * a.conj();
        }
        v
    }))
}
