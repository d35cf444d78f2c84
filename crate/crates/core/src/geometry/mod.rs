//! Closed oriented interfaces on the unit torus.
//!
//! A loop is stored as markers reduced to `[0,1)²` plus its homology class
//! (`winding`) and an orientation flag. The lift to the plane is rebuilt on
//! demand by unwrapping consecutive markers, so a stored curve round-trips
//! through text bit-exactly. On the lift, a loop with `N` markers is the
//! periodic function `X(α) = p(α) + w α / 2π` of `α ∈ [0, 2π)`, and all
//! derivatives act on the periodic part `p` spectrally.
//!
//! Contractible loops are traversed counter-clockwise; `orientation` then says
//! on which side the phase `E` lies: `ν = o·(τ_y, −τ_x)` always points out of
//! `E`, and `κ = o·(X′×X″)/|X′|³` is positive on a disk-phase circle.

mod distance;
mod resample;
pub mod shapes;

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, TrigInterpolant};

pub use distance::{height_function, self_intersection, signed_distance_grid, tubular_radius};
pub use resample::{resample_equal_arclength, spacing_error};

/// Minimum number of markers on a loop.
pub const MIN_MARKERS: usize = 16;

#[inline]
pub fn min_image(d: f64) -> f64 {
    d - d.round()
}

#[inline]
pub fn min_image2(d: [f64; 2]) -> [f64; 2] {
    [min_image(d[0]), min_image(d[1])]
}

#[inline]
pub fn reduce(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
pub fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// One closed component of the interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerLoop {
    markers: Vec<[f64; 2]>,
    winding: [i32; 2],
    orientation: i8,
}

impl MarkerLoop {
    /// Markers may be given lifted or reduced; they are stored reduced.
    pub fn new(markers: Vec<[f64; 2]>, winding: [i32; 2], orientation: i8) -> Result<Self> {
        if orientation != 1 && orientation != -1 {
            return Err(Error::InvalidInput(format!("orientation must be ±1, got {orientation}")));
        }
        if markers.len() < MIN_MARKERS {
            return Err(Error::Resolution(format!(
                "loop has {} markers, need at least {MIN_MARKERS}",
                markers.len()
            )));
        }
        if markers.iter().any(|m| !m[0].is_finite() || !m[1].is_finite()) {
            return Err(Error::InvalidInput("non-finite marker coordinate".into()));
        }
        let markers = markers.into_iter().map(|m| [reduce(m[0]), reduce(m[1])]).collect();
        let l = Self { markers, winding, orientation };
        l.check_closure()?;
        Ok(l)
    }

    pub(crate) fn from_reduced(markers: Vec<[f64; 2]>, winding: [i32; 2], orientation: i8) -> Self {
        Self { markers, winding, orientation }
    }

    pub fn markers(&self) -> &[[f64; 2]] {
        &self.markers
    }

    pub fn winding(&self) -> [i32; 2] {
        self.winding
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn is_contractible(&self) -> bool {
        self.winding == [0, 0]
    }

    fn wf(&self) -> [f64; 2] {
        [self.winding[0] as f64, self.winding[1] as f64]
    }

    /// Lifted markers: consecutive steps are minimum-image displacements.
    pub fn lifted(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.markers.len());
        let mut cur = self.markers[0];
        out.push(cur);
        for w in self.markers.windows(2) {
            let d = min_image2([w[1][0] - w[0][0], w[1][1] - w[0][1]]);
            cur = [cur[0] + d[0], cur[1] + d[1]];
            out.push(cur);
        }
        out
    }

    fn check_closure(&self) -> Result<()> {
        let lift = self.lifted();
        let last = lift[lift.len() - 1];
        let first = self.markers[0];
        let step = min_image2([first[0] - last[0], first[1] - last[1]]);
        let end = [last[0] + step[0] - first[0], last[1] + step[1] - first[1]];
        let w = self.wf();
        if (end[0] - w[0]).abs() > 1e-9 || (end[1] - w[1]).abs() > 1e-9 {
            return Err(Error::Topology(format!(
                "markers close with displacement ({:.3}, {:.3}) but winding is {:?}; markers too sparse?",
                end[0], end[1], self.winding
            )));
        }
        let h_min = lift
            .windows(2)
            .map(|w| dist(w[0], w[1]))
            .chain(std::iter::once(step[0].hypot(step[1])))
            .fold(f64::INFINITY, f64::min);
        if h_min <= 1e-14 {
            return Err(Error::InvalidInput("coincident consecutive markers".into()));
        }
        Ok(())
    }

    /// Periodic part `p_j = X_j − w α_j / 2π` of the lift.
    pub fn periodic_part(&self) -> [Vec<f64>; 2] {
        let n = self.len();
        let w = self.wf();
        let lift = self.lifted();
        let mut px = Vec::with_capacity(n);
        let mut py = Vec::with_capacity(n);
        for (j, x) in lift.iter().enumerate() {
            let t = j as f64 / n as f64;
            px.push(x[0] - w[0] * t);
            py.push(x[1] - w[1] * t);
        }
        [px, py]
    }

    /// Spectral point evaluator of the lifted parametrization.
    pub fn interpolant(&self) -> LoopInterpolant {
        let [px, py] = self.periodic_part();
        LoopInterpolant { px: TrigInterpolant::new(&px), py: TrigInterpolant::new(&py), w: self.wf() }
    }

    /// Lifted-frame signed area integral (start-point invariant).
    fn area_integral(&self) -> f64 {
        let [px, py] = self.periodic_part();
        let n = px.len() as f64;
        let dx = spectral::derivative(&px, 1);
        let dy = spectral::derivative(&py, 1);
        let w = self.wf();
        let mut mean_p = [0.0, 0.0];
        let mut pp = 0.0;
        for j in 0..px.len() {
            mean_p[0] += px[j];
            mean_p[1] += py[j];
            pp += px[j] * dy[j] - py[j] * dx[j];
        }
        mean_p = [mean_p[0] / n, mean_p[1] / n];
        // (1/2π)∫ p×w dα + ½∫ p×p′ dα
        cross(mean_p, w) + PI * pp / n
    }
}

#[inline]
pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Spectral evaluator `α ↦ X(α)` on the lift.
#[derive(Debug, Clone)]
pub struct LoopInterpolant {
    px: TrigInterpolant,
    py: TrigInterpolant,
    w: [f64; 2],
}

impl LoopInterpolant {
    pub fn point(&self, alpha: f64) -> [f64; 2] {
        let t = alpha / (2.0 * PI);
        [self.px.eval(alpha) + self.w[0] * t, self.py.eval(alpha) + self.w[1] * t]
    }

    /// Point and `dX/dα`.
    pub fn point_and_tangent(&self, alpha: f64) -> ([f64; 2], [f64; 2]) {
        let t = alpha / (2.0 * PI);
        let (x, dx) = self.px.eval_with_derivative(alpha);
        let (y, dy) = self.py.eval_with_derivative(alpha);
        (
            [x + self.w[0] * t, y + self.w[1] * t],
            [dx + self.w[0] / (2.0 * PI), dy + self.w[1] / (2.0 * PI)],
        )
    }
}

/// Differential geometry of one loop at its markers.
#[derive(Debug, Clone)]
pub struct LoopFrame {
    pub lifted: Vec<[f64; 2]>,
    /// `dX/dα`.
    pub d1: Vec<[f64; 2]>,
    pub d2: Vec<[f64; 2]>,
    pub speed: Vec<f64>,
    pub tangent: Vec<[f64; 2]>,
    pub normal: Vec<[f64; 2]>,
    pub kappa: Vec<f64>,
    /// Trapezoid arclength weights `(2π/N)|X′|`.
    pub weights: Vec<f64>,
    pub length: f64,
    pub orientation: f64,
}

/// Relative level below which marker-coordinate Fourier coefficients are
/// treated as round-off.
pub const KRASNY_TOL: f64 = 1e-14;

impl LoopFrame {
    pub fn new(l: &MarkerLoop) -> Self {
        let n = l.len();
        let lifted = l.lifted();
        let [px, py] = l.periodic_part();
        let w = l.wf();
        let (cx, cy) = (spectral::krasny_coefficients(&px, KRASNY_TOL), spectral::krasny_coefficients(&py, KRASNY_TOL));
        let dx = spectral::derivative_of_coefficients(&cx, 1);
        let dy = spectral::derivative_of_coefficients(&cy, 1);
        let ddx = spectral::derivative_of_coefficients(&cx, 2);
        let ddy = spectral::derivative_of_coefficients(&cy, 2);
        let o = l.orientation as f64;
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        let mut speed = Vec::with_capacity(n);
        let mut tangent = Vec::with_capacity(n);
        let mut normal = Vec::with_capacity(n);
        let mut kappa = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let h = 2.0 * PI / n as f64;
        for j in 0..n {
            let a = [dx[j] + w[0] / (2.0 * PI), dy[j] + w[1] / (2.0 * PI)];
            let b = [ddx[j], ddy[j]];
            let s = a[0].hypot(a[1]);
            let t = [a[0] / s, a[1] / s];
            d1.push(a);
            d2.push(b);
            speed.push(s);
            tangent.push(t);
            normal.push([o * t[1], -o * t[0]]);
            kappa.push(o * cross(a, b) / (s * s * s));
            weights.push(h * s);
        }
        let length = weights.iter().sum();
        Self { lifted, d1, d2, speed, tangent, normal, kappa, weights, length, orientation: o }
    }

    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }

    /// `D_s f = f_α / |X′|`.
    pub fn d_s(&self, f: &[f64]) -> Vec<f64> {
        spectral::derivative(f, 1).iter().zip(&self.speed).map(|(d, s)| d / s).collect()
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.d_s(&self.d_s(f))
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, b)| a * b).sum()
    }
}

/// What a per-marker sample array carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Curvature,
    Velocity,
    Density,
    BoundaryData,
    Height,
    Generic,
}

/// One scalar per marker, concatenated over loops in curve order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSamples {
    pub kind: SampleKind,
    pub values: Vec<f64>,
}

impl CurveSamples {
    pub fn new(kind: SampleKind, values: Vec<f64>) -> Self {
        Self { kind, values }
    }

    pub fn zeros(kind: SampleKind, n: usize) -> Self {
        Self { kind, values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Slices per loop of `curve`.
    pub fn per_loop<'a>(&'a self, curve: &PeriodicCurve) -> Vec<&'a [f64]> {
        let mut out = Vec::with_capacity(curve.loops.len());
        let mut start = 0;
        for l in &curve.loops {
            out.push(&self.values[start..start + l.len()]);
            start += l.len();
        }
        out
    }
}

/// The interface `∂E`: one or more disjoint loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicCurve {
    loops: Vec<MarkerLoop>,
    #[serde(skip)]
    frames: OnceLock<Vec<LoopFrame>>,
}

impl PartialEq for PeriodicCurve {
    fn eq(&self, other: &Self) -> bool {
        self.loops == other.loops
    }
}

impl PeriodicCurve {
    /// Validated construction, including the pairwise segment intersection test.
    pub fn new(loops: Vec<MarkerLoop>) -> Result<Self> {
        let c = Self::from_loops_unchecked(loops);
        c.validate()?;
        Ok(c)
    }

    pub(crate) fn from_loops_unchecked(loops: Vec<MarkerLoop>) -> Self {
        Self { loops, frames: OnceLock::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.loops.is_empty() {
            return Err(Error::InvalidInput("curve has no loops".into()));
        }
        for l in &self.loops {
            if l.len() < MIN_MARKERS {
                return Err(Error::Resolution(format!("loop has {} markers", l.len())));
            }
            l.check_closure()?;
            if l.is_contractible() && l.area_integral() <= 0.0 {
                return Err(Error::Orientation(
                    "contractible loops must be traversed counter-clockwise".into(),
                ));
            }
        }
        enclosed_area(self)?;
        if let Some((a, b)) = self_intersection(self) {
            return Err(Error::Topology(format!(
                "segments {a:?} and {b:?} intersect (loop, segment)"
            )));
        }
        Ok(())
    }

    pub fn loops(&self) -> &[MarkerLoop] {
        &self.loops
    }

    pub fn into_loops(self) -> Vec<MarkerLoop> {
        self.loops
    }

    pub fn n_markers(&self) -> usize {
        self.loops.iter().map(|l| l.len()).sum()
    }

    /// Start offsets of each loop in concatenated sample arrays.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.loops.len() + 1);
        let mut s = 0;
        o.push(0);
        for l in &self.loops {
            s += l.len();
            o.push(s);
        }
        o
    }

    pub fn frames(&self) -> &[LoopFrame] {
        self.frames.get_or_init(|| self.loops.iter().map(LoopFrame::new).collect())
    }

    /// All markers (reduced) in concatenated order.
    pub fn points(&self) -> Vec<[f64; 2]> {
        self.loops.iter().flat_map(|l| l.markers.iter().copied()).collect()
    }

    /// Lifted markers in concatenated order.
    pub fn lifted_points(&self) -> Vec<[f64; 2]> {
        self.frames().iter().flat_map(|f| f.lifted.iter().copied()).collect()
    }

    pub fn normals(&self) -> Vec<[f64; 2]> {
        self.frames().iter().flat_map(|f| f.normal.iter().copied()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.frames().iter().flat_map(|f| f.weights.iter().copied()).collect()
    }

    pub fn kappa(&self) -> Vec<f64> {
        self.frames().iter().flat_map(|f| f.kappa.iter().copied()).collect()
    }

    /// `∫_∂E f ds` by the periodic trapezoid rule.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n_markers());
        let mut s = 0.0;
        let mut start = 0;
        for fr in self.frames() {
            s += fr.integrate(&f[start..start + fr.len()]);
            start += fr.len();
        }
        s
    }

    /// Apply a per-loop operator to concatenated samples.
    pub fn map_loops(&self, f: &[f64], op: impl Fn(&LoopFrame, &[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(f.len());
        let mut start = 0;
        for fr in self.frames() {
            out.extend(op(fr, &f[start..start + fr.len()]));
            start += fr.len();
        }
        out
    }

    /// Move every marker by `δ_j ν_j` (lifted, then reduced).
    pub fn displaced(&self, delta: &[f64]) -> Self {
        let mut loops = Vec::with_capacity(self.loops.len());
        let mut k = 0;
        for (l, fr) in self.loops.iter().zip(self.frames()) {
            let m = fr
                .lifted
                .iter()
                .zip(&fr.normal)
                .map(|(x, nu)| {
                    let d = delta[k];
                    k += 1;
                    [reduce(x[0] + d * nu[0]), reduce(x[1] + d * nu[1])]
                })
                .collect();
            loops.push(MarkerLoop::from_reduced(m, l.winding, l.orientation));
        }
        Self::from_loops_unchecked(loops)
    }

    /// Same loops with new lifted marker positions (concatenated, any lift).
    pub fn with_lifted(&self, lifted: &[[f64; 2]]) -> Self {
        let mut k = 0;
        let loops = self
            .loops
            .iter()
            .map(|l| {
                let m = lifted[k..k + l.len()].iter().map(|x| [reduce(x[0]), reduce(x[1])]).collect();
                k += l.len();
                MarkerLoop::from_reduced(m, l.winding, l.orientation)
            })
            .collect();
        Self::from_loops_unchecked(loops)
    }

    /// Rigid translation.
    pub fn translated(&self, shift: [f64; 2]) -> Self {
        let loops = self
            .loops
            .iter()
            .map(|l| {
                let m = l.markers.iter().map(|x| [reduce(x[0] + shift[0]), reduce(x[1] + shift[1])]).collect();
                MarkerLoop::from_reduced(m, l.winding, l.orientation)
            })
            .collect();
        Self::from_loops_unchecked(loops)
    }

    /// Minimum distance between consecutive markers over all loops.
    pub fn min_spacing(&self) -> f64 {
        self.frames()
            .iter()
            .flat_map(|f| {
                let n = f.lifted.len();
                (0..n).map(move |j| {
                    let a = f.lifted[j];
                    let b = f.lifted[(j + 1) % n];
                    let d = min_image2([b[0] - a[0], b[1] - a[1]]);
                    d[0].hypot(d[1])
                })
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_resolution(curve: &PeriodicCurve) -> Result<()> {
    for l in curve.loops() {
        if l.len() < MIN_MARKERS {
            return Err(Error::Resolution(format!("loop has {} markers, need {MIN_MARKERS}", l.len())));
        }
    }
    Ok(())
}

fn check_samples(curve: &PeriodicCurve, f: &CurveSamples) -> Result<()> {
    if f.len() != curve.n_markers() {
        return Err(Error::InvalidInput(format!(
            "sample length {} does not match {} markers",
            f.len(),
            curve.n_markers()
        )));
    }
    Ok(())
}

/// Signed curvature at every marker.
pub fn curvature(curve: &PeriodicCurve) -> Result<CurveSamples> {
    check_resolution(curve)?;
    Ok(CurveSamples::new(SampleKind::Curvature, curve.kappa()))
}

/// Second arclength derivative on each loop.
pub fn surface_laplacian(curve: &PeriodicCurve, f: &CurveSamples) -> Result<CurveSamples> {
    check_samples(curve, f)?;
    Ok(CurveSamples::new(f.kind, curve.map_loops(&f.values, |fr, v| fr.laplacian(v))))
}

/// First arclength derivative along the traversal direction.
pub fn arclength_derivative(curve: &PeriodicCurve, f: &CurveSamples) -> Result<CurveSamples> {
    check_samples(curve, f)?;
    Ok(CurveSamples::new(f.kind, curve.map_loops(&f.values, |fr, v| fr.d_s(v))))
}

/// Total length of all loops.
pub fn perimeter(curve: &PeriodicCurve) -> f64 {
    curve.frames().iter().map(|f| f.length).sum()
}

/// Area of the phase `E`, in `(0, 1)`.
pub fn enclosed_area(curve: &PeriodicCurve) -> Result<f64> {
    let mut net = [0i64, 0i64];
    let mut a = 0.0;
    for l in curve.loops() {
        let o = l.orientation as i64;
        net[0] += o * l.winding[0] as i64;
        net[1] += o * l.winding[1] as i64;
        a += l.orientation as f64 * l.area_integral();
    }
    if net != [0, 0] {
        return Err(Error::Orientation(format!(
            "oriented windings do not cancel (net {net:?}); the phase is not well defined"
        )));
    }
    let r = a - a.floor();
    if !(1e-12..1.0 - 1e-12).contains(&r) {
        return Err(Error::Orientation(format!("phase area {a} is degenerate")));
    }
    Ok(r)
}

#[cfg(test)]
mod tests;
