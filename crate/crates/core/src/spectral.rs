//! Fourier machinery shared by the loop geometry and the grid solver.
//!
//! Loop samples live on the parameter circle `α ∈ [0, 2π)` at `α_j = 2πj/N`.
//! Derivatives drop the Nyquist mode so that `D² = D∘D` holds exactly, which
//! keeps discrete integration by parts exact on every loop.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanKey = (usize, bool);

fn plan_cache() -> &'static RwLock<HashMap<PlanKey, Arc<dyn Fft<f64>>>> {
    static CACHE: OnceLock<RwLock<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached FFT plan for length `n`; `forward` selects the sign of the exponent.
pub fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    if let Some(p) = plan_cache().read().expect("fft cache poisoned").get(&(n, forward)) {
        return Arc::clone(p);
    }
    let mut planner = FftPlanner::new();
    let p = if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    };
    plan_cache()
        .write()
        .expect("fft cache poisoned")
        .entry((n, forward))
        .or_insert(p)
        .clone()
}

/// Signed integer wavenumber of FFT bin `j` for length `n`.
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Normalised Fourier coefficients `c_k = (1/N) Σ f_j e^{-ikα_j}` in FFT order.
pub fn coefficients(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, true).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

/// Inverse of [`coefficients`], real part only.
pub fn synthesize(coeffs: &[Complex64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut buf = coeffs.to_vec();
    plan(n, false).process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// `order`-th derivative in α of the trigonometric interpolant of `values`.
pub fn derivative(values: &[f64], order: u32) -> Vec<f64> {
    if order == 0 {
        return values.to_vec();
    }
    derivative_of_coefficients(&coefficients(values), order)
}

/// `order`-th derivative from the coefficients (the Nyquist mode is dropped).
pub fn derivative_of_coefficients(coeffs: &[Complex64], order: u32) -> Vec<f64> {
    let n = coeffs.len();
    let mut c = coeffs.to_vec();
    for (j, cj) in c.iter_mut().enumerate() {
        let k = wavenumber(j, n);
        if n % 2 == 0 && j == n / 2 {
            *cj = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, k as f64);
        *cj *= ik.powu(order);
    }
    synthesize(&c)
}

/// Krasny filter: coefficients below `rel_tol` times the largest one are set to
/// zero, so round-off in the samples is not amplified by repeated derivatives.
pub fn krasny_coefficients(values: &[f64], rel_tol: f64) -> Vec<Complex64> {
    let mut c = coefficients(values);
    let cut = rel_tol * c.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    for z in c.iter_mut() {
        if z.norm() < cut {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    c
}

/// Apply a real even Fourier multiplier `m(k)` to periodic samples.
pub fn apply_multiplier(values: &[f64], m: impl Fn(i64) -> f64) -> Vec<f64> {
    let n = values.len();
    let mut c = coefficients(values);
    for (j, cj) in c.iter_mut().enumerate() {
        *cj *= m(wavenumber(j, n));
    }
    synthesize(&c)
}

/// Antiderivative of periodic samples with zero value at `α = 0`, excluding the
/// mean, which is returned separately as the slope (`∫ f dα = 2π·mean`).
pub fn periodic_antiderivative(values: &[f64]) -> (f64, Vec<Complex64>) {
    let n = values.len();
    let c = coefficients(values);
    let mean = c[0].re;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (j, cj) in c.iter().enumerate() {
        if j == 0 || (n % 2 == 0 && j == n / 2) {
            continue;
        }
        let k = wavenumber(j, n) as f64;
        out[j] = *cj / Complex64::new(0.0, k);
    }
    (mean, out)
}

/// Evaluator for the real trigonometric interpolant at arbitrary `α`.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    /// `a_0 .. a_{N/2}` such that `f(α) = Re Σ a_k e^{ikα}`.
    terms: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(values: &[f64]) -> Self {
        Self::from_coefficients(&coefficients(values))
    }

    pub fn from_coefficients(c: &[Complex64]) -> Self {
        let n = c.len();
        let half = n / 2;
        let mut terms = Vec::with_capacity(half + 1);
        terms.push(c[0]);
        for k in 1..=half {
            if n % 2 == 0 && k == half {
                // Nyquist: cosine only
                terms.push(Complex64::new(c[k].re, 0.0));
            } else {
                terms.push(c[k] * 2.0);
            }
        }
        Self { terms }
    }

    /// Value and first derivative at `α`.
    pub fn eval_with_derivative(&self, alpha: f64) -> (f64, f64) {
        let step = Complex64::from_polar(1.0, alpha);
        let mut e = Complex64::new(1.0, 0.0);
        let mut v = 0.0;
        let mut d = 0.0;
        for (k, a) in self.terms.iter().enumerate() {
            let t = a * e;
            v += t.re;
            // d/dα Re(a e^{ikα}) = Re(i k a e^{ikα}) = -k Im(a e^{ikα})
            d -= k as f64 * t.im;
            e *= step;
            if k % 16 == 15 {
                // re-anchor the recurrence to keep phase error at round-off
                e = Complex64::from_polar(1.0, (k + 1) as f64 * alpha);
            }
        }
        (v, d)
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        self.eval_with_derivative(alpha).0
    }
}

/// In-place 2D FFT of an `n × n` row-major complex array.
pub fn fft2(data: &mut [Complex64], n: usize, forward: bool) {
    let p = plan(n, forward);
    for row in data.chunks_mut(n) {
        p.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            col[j] = data[j * n + i];
        }
        p.process(&mut col);
        for j in 0..n {
            data[j * n + i] = col[j];
        }
    }
}
