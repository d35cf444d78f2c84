use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::{min_image2, reduce, self_intersection, MarkerLoop, PeriodicCurve, MIN_MARKERS};
use crate::error::{Error, Result};
use crate::spectral::{self, TrigInterpolant};

/// Arclength `s(α) = L α / 2π + A(α) − A(0)` of a loop from the Fourier series
/// of its speed.
struct ArcLength {
    slope: f64,
    osc: TrigInterpolant,
    speed: TrigInterpolant,
    offset: f64,
}

impl ArcLength {
    fn new(speed: &[f64]) -> Self {
        let (mean, anti): (f64, Vec<Complex64>) = spectral::periodic_antiderivative(speed);
        let osc = TrigInterpolant::from_coefficients(&anti);
        let offset = osc.eval(0.0);
        Self { slope: mean, osc, speed: TrigInterpolant::new(speed), offset }
    }

    fn eval(&self, a: f64) -> f64 {
        self.slope * a + self.osc.eval(a) - self.offset
    }

    fn length(&self) -> f64 {
        2.0 * PI * self.slope
    }
}

fn resample_loop(l: &MarkerLoop, speed: &[f64], m: usize) -> MarkerLoop {
    let arc = ArcLength::new(speed);
    let ip = l.interpolant();
    let total = arc.length();
    let mut markers = Vec::with_capacity(m);
    let mut alpha = 0.0f64;
    for j in 0..m {
        let target = total * j as f64 / m as f64;
        // warm start from the previous root shifted by the mean step
        if j > 0 {
            alpha += 2.0 * PI / m as f64;
        }
        for _ in 0..50 {
            let r = arc.eval(alpha) - target;
            let s = arc.speed.eval(alpha);
            let step = r / s;
            alpha -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let x = ip.point(alpha);
        markers.push([reduce(x[0]), reduce(x[1])]);
    }
    MarkerLoop::from_reduced(markers, l.winding(), l.orientation())
}

/// Redistribute markers to equal arclength spacing, keeping marker 0 fixed.
pub fn resample_equal_arclength(curve: &PeriodicCurve, n_per_loop: usize) -> Result<PeriodicCurve> {
    if n_per_loop < MIN_MARKERS {
        return Err(Error::Resolution(format!("n_per_loop = {n_per_loop} < {MIN_MARKERS}")));
    }
    resample_unchecked(curve, n_per_loop).and_then(|c| {
        if let Some((a, b)) = self_intersection(&c) {
            Err(Error::Topology(format!("self-intersection between segments {a:?} and {b:?}")))
        } else {
            Ok(c)
        }
    })
}

/// Resampling without the quadratic-cost intersection test.
pub(crate) fn resample_unchecked(curve: &PeriodicCurve, n_per_loop: usize) -> Result<PeriodicCurve> {
    let mut cur = curve.clone();
    // a second pass removes the residual spacing error of interpolating a
    // non-band-limited reparametrization
    for _ in 0..2 {
        let loops = cur
            .loops()
            .iter()
            .zip(cur.frames())
            .map(|(l, f)| resample_loop(l, &f.speed, n_per_loop))
            .collect();
        cur = PeriodicCurve::from_loops_unchecked(loops);
        if spacing_error(&cur) < 1e-13 {
            break;
        }
    }
    for l in cur.loops() {
        let lift = l.lifted();
        let last = lift[lift.len() - 1];
        let d = min_image2([l.markers()[0][0] - last[0], l.markers()[0][1] - last[1]]);
        if d[0].hypot(d[1]) == 0.0 {
            return Err(Error::Topology("degenerate loop after resampling".into()));
        }
    }
    Ok(cur)
}

/// Largest relative deviation of spectral arclength between consecutive
/// markers from `L/N`, over all loops.
pub fn spacing_error(curve: &PeriodicCurve) -> f64 {
    let mut worst: f64 = 0.0;
    for f in curve.frames() {
        let arc = ArcLength::new(&f.speed);
        let n = f.len();
        let h = arc.length() / n as f64;
        for j in 0..n {
            let a = 2.0 * PI * j as f64 / n as f64;
            let s = arc.eval(a);
            worst = worst.max((s - h * j as f64).abs() / h);
        }
    }
    worst
}
