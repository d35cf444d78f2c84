//! Doubly periodic grid fields, the zero-mean Poisson solve, and potentials of
//! the phase indicator and of line measures.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{signed_distance_grid, CurveSamples, PeriodicCurve, SampleKind};
use crate::par;
use crate::spectral::{fft2, wavenumber};

/// `n × n` samples at nodes `(i/n, j/n)`, row `j` holding `y = j/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub values: Vec<f64>,
    pub zero_mean: bool,
}

impl GridField {
    pub fn new(n: usize, values: Vec<f64>, zero_mean: bool) -> Self {
        assert_eq!(values.len(), n * n, "grid field needs n² values");
        Self { n, values, zero_mean }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Self {
        let values = par::map_indexed(n * n, |k| f((k % n) as f64 / n as f64, (k / n) as f64 / n as f64));
        Self::new(n, values, false)
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.n + ix]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Normalised spectrum `v̂_k = N⁻² Σ v e^{-2πik·x}`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut buf, self.n, true);
        let s = 1.0 / (self.n * self.n) as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        buf
    }

    pub fn from_spectrum(n: usize, mut spec: Vec<Complex64>, zero_mean: bool) -> Self {
        fft2(&mut spec, n, false);
        Self::new(n, spec.iter().map(|c| c.re).collect(), zero_mean)
    }

    /// Binary format: `n` and the zero-mean flag as little-endian `u64`, then
    /// the values as little-endian `f64`, row-major.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.zero_mean as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let flag = u64::from_le_bytes(b8);
        if n == 0 || n > 1 << 14 || flag > 1 {
            return Err(Error::InvalidInput(format!("bad grid header n={n} flag={flag}")));
        }
        let mut values = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Ok(Self::new(n, values, flag == 1))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// `x,y,value` rows for inspection.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "x,y,value")?;
        for iy in 0..self.n {
            for ix in 0..self.n {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    ix as f64 / self.n as f64,
                    iy as f64 / self.n as f64,
                    self.at(ix, iy)
                )?;
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn lambda(n: usize, j: usize, i: usize) -> f64 {
    let kx = wavenumber(i, n) as f64;
    let ky = wavenumber(j, n) as f64;
    4.0 * PI * PI * (kx * kx + ky * ky)
}

/// Smoothed phase indicator `u = χ_E − χ_{E^c}`: `u = −erf(d/w)` with `w` the
/// smoothing width in grid cells, and exactly `±1` beyond six widths.
pub fn rasterize_indicator(curve: &PeriodicCurve, n: usize, width_cells: f64) -> Result<GridField> {
    if n < 128 {
        return Err(Error::Resolution(format!("indicator grid n = {n} < 128")));
    }
    let d = signed_distance_grid(curve, n)?;
    let w = width_cells / n as f64;
    let values = d
        .values
        .iter()
        .map(|&s| {
            if s.abs() >= 6.0 * w {
                -s.signum()
            } else {
                -libm::erf(s / w)
            }
        })
        .collect();
    Ok(GridField::new(n, values, false))
}

/// `−Δv = rhs − mean(rhs)` with `∫v = 0`, by the spectral symbol `4π²|k|²`.
pub fn solve_poisson_zero_mean(rhs: &GridField) -> GridField {
    let n = rhs.n;
    let mut s = rhs.spectrum();
    for j in 0..n {
        for i in 0..n {
            let l = lambda(n, j, i);
            s[j * n + i] = if l == 0.0 { Complex64::new(0.0, 0.0) } else { s[j * n + i] / l };
        }
    }
    GridField::from_spectrum(n, s, true)
}

/// Spectral Laplacian, for residual checks.
pub fn laplacian(v: &GridField) -> GridField {
    let n = v.n;
    let mut s = v.spectrum();
    for j in 0..n {
        for i in 0..n {
            s[j * n + i] *= -lambda(n, j, i);
        }
    }
    GridField::from_spectrum(n, s, true)
}

/// `∫|Dv|²` by Parseval.
pub fn dirichlet_energy(v: &GridField) -> f64 {
    let n = v.n;
    let s = v.spectrum();
    let mut e = 0.0;
    for j in 0..n {
        for i in 0..n {
            e += lambda(n, j, i) * s[j * n + i].norm_sqr();
        }
    }
    e
}

/// `v_E` and its one-sided-average normal derivative on `∂E`.
#[derive(Debug, Clone)]
pub struct PotentialTrace {
    pub boundary_values: CurveSamples,
    pub normal_derivative: CurveSamples,
}

/// Evaluator of the band-limited interpolant of a grid field (Nyquist rows
/// and columns dropped) at arbitrary points.
pub struct SpectralInterpolant {
    n: usize,
    spec: Vec<Complex64>,
}

impl SpectralInterpolant {
    pub fn new(v: &GridField) -> Self {
        Self { n: v.n, spec: v.spectrum() }
    }

    fn phases(&self, x: f64) -> Vec<Complex64> {
        (0..self.n).map(|i| Complex64::from_polar(1.0, 2.0 * PI * wavenumber(i, self.n) as f64 * x)).collect()
    }

    /// Value and gradient at `p`.
    pub fn eval(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        let n = self.n;
        let ex = self.phases(p[0]);
        let ey = self.phases(p[1]);
        let mut v = Complex64::new(0.0, 0.0);
        let mut gx = Complex64::new(0.0, 0.0);
        let mut gy = Complex64::new(0.0, 0.0);
        for j in 0..n {
            if n % 2 == 0 && j == n / 2 {
                continue;
            }
            let mut row = Complex64::new(0.0, 0.0);
            let mut rowx = Complex64::new(0.0, 0.0);
            for i in 0..n {
                if n % 2 == 0 && i == n / 2 {
                    continue;
                }
                let t = self.spec[j * n + i] * ex[i];
                row += t;
                rowx += t * wavenumber(i, n) as f64;
            }
            v += row * ey[j];
            gx += rowx * ey[j];
            gy += row * ey[j] * wavenumber(j, n) as f64;
        }
        let tp = 2.0 * PI;
        (v.re, [-tp * gx.im, -tp * gy.im])
    }
}

/// Grid route for the phase potential: rasterize, Poisson-solve, interpolate.
pub fn potential_of_set(curve: &PeriodicCurve, n: usize, width_cells: f64) -> Result<(GridField, PotentialTrace)> {
    let u = rasterize_indicator(curve, n, width_cells)?;
    let v = solve_poisson_zero_mean(&u);
    let ip = SpectralInterpolant::new(&v);
    let pts = curve.lifted_points();
    let normals = curve.normals();
    let evals = par::map_slice(&pts, |p| ip.eval(*p));
    let vals = evals.iter().map(|e| e.0).collect();
    let dn = evals.iter().zip(&normals).map(|(e, nu)| e.1[0] * nu[0] + e.1[1] * nu[1]).collect();
    Ok((
        v,
        PotentialTrace {
            boundary_values: CurveSamples::new(SampleKind::BoundaryData, vals),
            normal_derivative: CurveSamples::new(SampleKind::Generic, dn),
        },
    ))
}

/// Potential `v_φ = ∫ G(·, y) φ(y) ds(y)` of a line measure, spread to the grid
/// by a Gaussian of standard deviation `sigma_cells` grid cells. Returns the
/// field and the arclength mean of `φ`, whose uniform background is dropped
/// with the zero mode.
pub fn line_measure_potential(
    curve: &PeriodicCurve,
    phi: &CurveSamples,
    n: usize,
    sigma_cells: f64,
) -> Result<(GridField, f64)> {
    let spec = line_measure_spectrum(curve, &phi.values, n, sigma_cells)?;
    let mean = spec.1;
    let mut s = spec.0;
    for j in 0..n {
        for i in 0..n {
            let l = lambda(n, j, i);
            s[j * n + i] = if l == 0.0 { Complex64::new(0.0, 0.0) } else { s[j * n + i] / l };
        }
    }
    Ok((GridField::from_spectrum(n, s, true), mean))
}

/// `∬ G φ φ = ∫|Dv_φ|²` for the smoothed line measure, computed directly in
/// Fourier space.
pub fn line_measure_energy(curve: &PeriodicCurve, phi: &[f64], n: usize, sigma_cells: f64) -> Result<f64> {
    let (s, _) = line_measure_spectrum(curve, phi, n, sigma_cells)?;
    let mut e = 0.0;
    for j in 0..n {
        for i in 0..n {
            let l = lambda(n, j, i);
            if l > 0.0 {
                e += s[j * n + i].norm_sqr() / l;
            }
        }
    }
    Ok(e)
}

pub(crate) fn line_measure_spectrum(
    curve: &PeriodicCurve,
    phi: &[f64],
    n: usize,
    sigma_cells: f64,
) -> Result<(Vec<Complex64>, f64)> {
    if phi.len() != curve.n_markers() {
        return Err(Error::InvalidInput("density length does not match the curve".into()));
    }
    let w = curve.weights();
    let total: f64 = w.iter().sum();
    let mean = phi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / total;
    // the k = 0 coefficient is dropped, which supplies the neutralising background
    let q: Vec<f64> = phi.iter().zip(&w).map(|(a, b)| a * b).collect();
    let pts = curve.points();
    let sigma = sigma_cells / n as f64;
    // direct non-uniform DFT, one output row per task
    let np = pts.len();
    let ex: Vec<Complex64> = par::map_indexed(n * np, |k| {
        let (i, m) = (k / np, k % np);
        Complex64::from_polar(q[m], -2.0 * PI * wavenumber(i, n) as f64 * pts[m][0])
    });
    let mut s = vec![Complex64::new(0.0, 0.0); n * n];
    par::fill_chunks(&mut s, n, |j, row| {
        let ky = wavenumber(j, n) as f64;
        if n % 2 == 0 && j == n / 2 {
            return;
        }
        let ey: Vec<Complex64> = pts.iter().map(|p| Complex64::from_polar(1.0, -2.0 * PI * ky * p[1])).collect();
        for (i, out) in row.iter_mut().enumerate() {
            if n % 2 == 0 && i == n / 2 {
                continue;
            }
            let kx = wavenumber(i, n) as f64;
            let acc: Complex64 = ey.iter().zip(&ex[i * np..(i + 1) * np]).map(|(a, b)| a * b).sum();
            let k2 = kx * kx + ky * ky;
            *out = acc * (-2.0 * PI * PI * sigma * sigma * k2).exp();
        }
    });
    Ok((s, mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::{circle, strip, StripAngle};

    #[test]
    fn single_mode_solve_and_energy() {
        let f = GridField::from_fn(64, |x, _| (2.0 * PI * x).cos());
        let v = solve_poisson_zero_mean(&f);
        for iy in 0..64 {
            for ix in 0..64 {
                let x = ix as f64 / 64.0;
                assert!((v.at(ix, iy) - (2.0 * PI * x).cos() / (4.0 * PI * PI)).abs() < 1e-15);
            }
        }
        assert!((dirichlet_energy(&v) - 1.0 / (8.0 * PI * PI)).abs() < 1e-15);
        let c = solve_poisson_zero_mean(&GridField::from_fn(32, |_, _| 3.0));
        assert!(c.max_abs() < 1e-15);
        assert_eq!(dirichlet_energy(&c), 0.0);
        let r = laplacian(&v);
        let err = r.values.iter().zip(&f.values).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn strip_indicator_and_energy() {
        let h = 0.3;
        let c = strip(h, 0.0, StripAngle::Horizontal, 64).unwrap();
        let u = rasterize_indicator(&c, 256, 1.5).unwrap();
        assert_eq!(u.at(128, (0.15f64 * 256.0) as usize), 1.0);
        assert_eq!(u.at(128, (0.65f64 * 256.0) as usize), -1.0);
        assert!((u.mean() - (2.0 * h - 1.0)).abs() <= 2.0 / 256.0);
        let v = solve_poisson_zero_mean(&u);
        let e = dirichlet_energy(&v);
        let exact = h * h * (1.0 - h) * (1.0 - h) / 3.0;
        assert!((e - exact).abs() / exact < 2e-3, "{e} vs {exact}");
    }

    #[test]
    fn binary_roundtrip() {
        let f = GridField::from_fn(16, |x, y| x * 3.0 - y);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 256);
        let g = GridField::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn lattice_shift_is_exact() {
        let a = circle([0.5, 0.5], 0.2, 64, true).unwrap();
        let b = a.translated([8.0 / 128.0, 0.0]);
        let va = solve_poisson_zero_mean(&rasterize_indicator(&a, 128, 1.5).unwrap());
        let vb = solve_poisson_zero_mean(&rasterize_indicator(&b, 128, 1.5).unwrap());
        for iy in 0..128 {
            for ix in 0..128 {
                assert!((va.at(ix, iy) - vb.at((ix + 8) % 128, iy)).abs() < 1e-12);
            }
        }
    }
}
