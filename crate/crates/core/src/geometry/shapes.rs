//! Constructors for the reference shapes: circles, straight strips in three
//! lattice directions, multi-strip lamellae, ellipses and normal perturbations.

use std::f64::consts::PI;

use super::{resample_equal_arclength, MarkerLoop, PeriodicCurve};
use crate::error::{Error, Result};

/// Direction of a straight strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripAngle {
    /// Interfaces `y = const`, winding `(1,0)`.
    Horizontal,
    /// Interfaces `x = const`, winding `(0,1)`.
    Vertical,
    /// Interfaces `y − x = const`, winding `(1,1)`.
    Diagonal,
}

impl StripAngle {
    pub fn from_degrees(deg: f64) -> Result<Self> {
        match deg.round() as i64 {
            0 | 180 => Ok(Self::Horizontal),
            90 | 270 => Ok(Self::Vertical),
            45 | 225 => Ok(Self::Diagonal),
            _ => Err(Error::InvalidInput(format!("strip angle {deg}° is not 0, 45 or 90"))),
        }
    }
}

/// Circle of radius `r`; `phase_inside = false` gives the complement phase.
pub fn circle(center: [f64; 2], r: f64, n: usize, phase_inside: bool) -> Result<PeriodicCurve> {
    ellipse(center, r, r, n, phase_inside)
}

pub fn ellipse(center: [f64; 2], a: f64, b: f64, n: usize, phase_inside: bool) -> Result<PeriodicCurve> {
    if !(a > 0.0 && b > 0.0 && a < 0.5 && b < 0.5) {
        return Err(Error::InvalidInput(format!("semi-axes ({a}, {b}) must lie in (0, 0.5)")));
    }
    let m = (0..n)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / n as f64;
            [center[0] + a * t.cos(), center[1] + b * t.sin()]
        })
        .collect();
    let o = if phase_inside { 1 } else { -1 };
    let c = PeriodicCurve::new(vec![MarkerLoop::new(m, [0, 0], o)?])?;
    if a == b {
        Ok(c)
    } else {
        resample_equal_arclength(&c, n)
    }
}

fn line_loop(origin: [f64; 2], angle: StripAngle, n: usize, orientation: i8) -> Result<MarkerLoop> {
    let (dir, w) = match angle {
        StripAngle::Horizontal => ([1.0, 0.0], [1, 0]),
        StripAngle::Vertical => ([0.0, 1.0], [0, 1]),
        StripAngle::Diagonal => ([1.0, 1.0], [1, 1]),
    };
    let m = (0..n)
        .map(|j| {
            let t = j as f64 / n as f64;
            [origin[0] + dir[0] * t, origin[1] + dir[1] * t]
        })
        .collect();
    MarkerLoop::new(m, w, orientation)
}

/// Phase occupying `offset ≤ c ≤ offset + h` where `c` is `y`, `x`, or `y − x`.
pub fn strip(h: f64, offset: f64, angle: StripAngle, n: usize) -> Result<PeriodicCurve> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidInput(format!("strip fraction {h} outside (0,1)")));
    }
    let at = |c: f64| match angle {
        StripAngle::Horizontal | StripAngle::Diagonal => [0.0, c],
        StripAngle::Vertical => [c, 0.0],
    };
    // the side convention flips for the vertical direction, where E lies to
    // the right of an upward traversal of the lower boundary
    let (lo, hi) = match angle {
        StripAngle::Horizontal | StripAngle::Diagonal => (1, -1),
        StripAngle::Vertical => (-1, 1),
    };
    PeriodicCurve::new(vec![line_loop(at(offset), angle, n, lo)?, line_loop(at(offset + h), angle, n, hi)?])
}

/// `k` horizontal strips of width `h/k` with period `1/k`, the first starting
/// at `offset`; `2k` interfaces in total.
pub fn lamella_k(k: usize, h: f64, offset: f64, n: usize) -> Result<PeriodicCurve> {
    if k == 0 || !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidInput(format!("lamella needs k ≥ 1 and h in (0,1), got k={k}, h={h}")));
    }
    let mut loops = Vec::with_capacity(2 * k);
    for i in 0..k {
        let y0 = offset + i as f64 / k as f64;
        loops.push(line_loop([0.0, y0], StripAngle::Horizontal, n, 1)?);
        loops.push(line_loop([0.0, y0 + h / k as f64], StripAngle::Horizontal, n, -1)?);
    }
    PeriodicCurve::new(loops)
}

/// Move each marker along the normal by `psi(loop, α)` and redistribute.
pub fn perturbed(
    base: &PeriodicCurve,
    psi: impl Fn(usize, f64) -> f64,
    n_per_loop: usize,
) -> Result<PeriodicCurve> {
    let mut delta = Vec::with_capacity(base.n_markers());
    for (li, l) in base.loops().iter().enumerate() {
        let n = l.len();
        for j in 0..n {
            delta.push(psi(li, 2.0 * PI * j as f64 / n as f64));
        }
    }
    let moved = base.displaced(&delta);
    moved.validate()?;
    resample_equal_arclength(&moved, n_per_loop)
}

/// Circle `r(θ) = r + ε cos(kθ)`.
pub fn perturbed_circle(center: [f64; 2], r: f64, k: u32, eps: f64, n: usize) -> Result<PeriodicCurve> {
    let base = circle(center, r, n, true)?;
    perturbed(&base, |_, t| eps * (k as f64 * t).cos(), n)
}

/// Horizontal interfaces `y = y_l + ε_l sin(2πk x)`; `amps[l]` per loop.
pub fn perturbed_lamella(base: &PeriodicCurve, k: u32, amps: &[f64], n: usize) -> Result<PeriodicCurve> {
    perturbed(
        base,
        |l, t| {
            // normal is +y on o = −1 interfaces and −y on o = +1 ones
            let o = base.loops()[l].orientation() as f64;
            -o * amps.get(l).copied().unwrap_or(0.0) * (k as f64 * t).sin()
        },
        n,
    )
}
