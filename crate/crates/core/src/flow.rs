//! Time integration of the MS and SD flows.
//!
//! Markers move along their normals only; after every step the loop is
//! redistributed to equal arclength and the enclosed area is restored by a
//! uniform normal offset. Two integrators are provided: classical RK4 with a
//! stiffness-limited step, and a linearly implicit–explicit scheme (ARS(2,2,2))
//! that treats the small-scale part of the velocity implicitly in Fourier
//! space — `−∂_s⁴` for SD and `−2|∂_s|³` for MS, frozen at the start of a step.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{EnergyTrace, StopReason, TraceRecord};
use crate::error::{Error, Result};
use crate::geometry::{
    enclosed_area, height_function, perimeter, resample_equal_arclength, CurveSamples, PeriodicCurve, SampleKind,
};
use crate::green::PeriodicGreen;
use crate::ms::{ms_normal_velocity, JumpSolution};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Ms,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    Ssd,
}

/// Velocity and energy bookkeeping at one curve.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub velocity: CurveSamples,
    /// `∫|Dw|²` (MS) or `∫|D_s κ|²` (SD).
    pub dissipation: f64,
    pub perimeter: f64,
    /// `∫|Dv_E|²`, computed only when `γ > 0`.
    pub nonlocal: f64,
    pub energy: f64,
    pub jump: Option<JumpSolution>,
}

/// `V = Δ_s κ` on every loop.
pub fn sd_normal_velocity(curve: &PeriodicCurve) -> CurveSamples {
    CurveSamples::new(SampleKind::Velocity, curve.map_loops(&curve.kappa(), |f, k| f.laplacian(k)))
}

/// Velocity, dissipation and energy of `curve` under the given flow.
pub fn evaluate(curve: &PeriodicCurve, kind: FlowKind, gamma: f64, green: &PeriodicGreen) -> Result<Evaluation> {
    let p = perimeter(curve);
    match kind {
        FlowKind::Sd => {
            let kappa = curve.kappa();
            let ks = curve.map_loops(&kappa, |f, k| f.d_s(k));
            let dissipation = curve.integrate(&ks.iter().map(|x| x * x).collect::<Vec<_>>());
            Ok(Evaluation {
                velocity: sd_normal_velocity(curve),
                dissipation,
                perimeter: p,
                nonlocal: 0.0,
                energy: p,
                jump: None,
            })
        }
        FlowKind::Ms => {
            let e = ms_normal_velocity(curve, gamma, green)?;
            let nonlocal = e.potential.as_ref().map_or(0.0, |p| p.nonlocal_energy);
            Ok(Evaluation {
                velocity: e.velocity,
                dissipation: e.solution.dissipation(),
                perimeter: p,
                nonlocal,
                energy: p + gamma * nonlocal,
                jump: Some(e.solution),
            })
        }
    }
}

/// Integrator settings. `c_cfl = None` selects the per-flow default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    pub scheme: Scheme,
    pub c_cfl: Option<f64>,
    pub area_tol: f64,
    /// Steps shorter than this end the run with a dt-underflow event.
    pub min_dt: f64,
    pub max_steps: usize,
    pub snapshot_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Rk4, c_cfl: None, area_tol: 1e-7, min_dt: 1e-14, max_steps: usize::MAX, snapshot_every: 0 }
    }
}

impl FlowConfig {
    pub fn c_cfl(&self, kind: FlowKind) -> f64 {
        self.c_cfl.unwrap_or(match (self.scheme, kind) {
            (Scheme::Rk4, FlowKind::Sd) => 0.02,
            (Scheme::Rk4, FlowKind::Ms) => 0.04,
            (Scheme::Ssd, FlowKind::Sd) => 0.05,
            (Scheme::Ssd, FlowKind::Ms) => 0.1,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub time: f64,
    pub curve: PeriodicCurve,
    pub target_area: f64,
    pub kind: FlowKind,
    pub gamma: f64,
    pub green: PeriodicGreen,
    pub cached: Option<Evaluation>,
}

impl FlowState {
    /// The target area is the area of `curve`. SD runs with `γ = 0`.
    pub fn new(curve: PeriodicCurve, kind: FlowKind, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("γ = {gamma} must be finite and non-negative")));
        }
        if kind == FlowKind::Sd && gamma != 0.0 {
            return Err(Error::InvalidInput("surface diffusion is run with γ = 0".into()));
        }
        let n0 = curve.loops()[0].len();
        if curve.loops().iter().any(|l| l.len() != n0) {
            return Err(Error::InvalidInput("all loops must carry the same number of markers".into()));
        }
        let target_area = enclosed_area(&curve)?;
        Ok(Self { time: 0.0, curve, target_area, kind, gamma, green: PeriodicGreen::default(), cached: None })
    }

    pub fn evaluation(&mut self) -> Result<&Evaluation> {
        if self.cached.is_none() {
            self.cached = Some(evaluate(&self.curve, self.kind, self.gamma, &self.green)?);
        }
        Ok(self.cached.as_ref().expect("just filled"))
    }

    fn markers_per_loop(&self) -> usize {
        self.curve.loops()[0].len()
    }
}

/// Stiffness-limited step `c·h⁴` (SD) or `c·h³` (MS) for RK4; the
/// implicit–explicit scheme instead uses the accuracy-limited `c·h²ℓ²` with
/// `ℓ = min(1, 1/max|κ|)`. In every case also `max|V|·dt ≤ h/4`.
pub fn adaptive_dt(state: &mut FlowState, config: &FlowConfig) -> Result<f64> {
    let h = state.curve.min_spacing();
    let c = config.c_cfl(state.kind);
    let kmax = state.curve.kappa().iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let ell = if kmax > 1.0 { 1.0 / kmax } else { 1.0 };
    let base = match (config.scheme, state.kind) {
        (Scheme::Rk4, FlowKind::Sd) => c * h.powi(4),
        (Scheme::Rk4, FlowKind::Ms) => c * h.powi(3),
        (Scheme::Ssd, FlowKind::Sd) => c * h * h * ell * ell,
        (Scheme::Ssd, FlowKind::Ms) => c * h * h * ell * ell,
    };
    let vmax = state.evaluation()?.velocity.max_abs();
    Ok(if vmax > 0.0 { base.min(0.25 * h / vmax) } else { base })
}

/// Restore the target area by a uniform normal offset (safeguarded Newton on
/// `A(δ) ≈ A + δ·P`). Returns the new curve and the total offset.
pub fn enforce_volume(curve: &PeriodicCurve, target_area: f64, tol: f64) -> Result<(PeriodicCurve, f64)> {
    let mut cur = curve.clone();
    let mut total = 0.0;
    for _ in 0..4 {
        let a = enclosed_area(&cur)?;
        let err = target_area - a;
        if err.abs() <= 1e-3 * tol {
            break;
        }
        let p = perimeter(&cur);
        let h = cur.min_spacing();
        let delta = (err / p).clamp(-0.25 * h, 0.25 * h);
        cur = cur.displaced(&vec![delta; cur.n_markers()]);
        total += delta;
    }
    let a = enclosed_area(&cur)?;
    if (a - target_area).abs() > tol {
        return Err(Error::Invariant(format!("area {a} misses target {target_area} after volume correction")));
    }
    Ok((cur, total))
}

fn velocity_field(curve: &PeriodicCurve, kind: FlowKind, gamma: f64, green: &PeriodicGreen) -> Result<Vec<[f64; 2]>> {
    let v = match kind {
        FlowKind::Sd => sd_normal_velocity(curve),
        FlowKind::Ms => ms_normal_velocity(curve, gamma, green)?.velocity,
    };
    Ok(v.values.iter().zip(curve.normals()).map(|(v, n)| [v * n[0], v * n[1]]).collect())
}

fn axpy(x: &[[f64; 2]], a: f64, k: &[[f64; 2]]) -> Vec<[f64; 2]> {
    x.iter().zip(k).map(|(x, k)| [x[0] + a * k[0], x[1] + a * k[1]]).collect()
}

/// One classical RK4 step of the marker ODE `Ẋ = V ν`, without redistribution.
pub fn rk4_advance(curve: &PeriodicCurve, dt: f64, kind: FlowKind, gamma: f64, green: &PeriodicGreen) -> Result<PeriodicCurve> {
    let x0 = curve.lifted_points();
    let k1 = velocity_field(curve, kind, gamma, green)?;
    let k2 = velocity_field(&curve.with_lifted(&axpy(&x0, 0.5 * dt, &k1)), kind, gamma, green)?;
    let k3 = velocity_field(&curve.with_lifted(&axpy(&x0, 0.5 * dt, &k2)), kind, gamma, green)?;
    let k4 = velocity_field(&curve.with_lifted(&axpy(&x0, dt, &k3)), kind, gamma, green)?;
    let x1: Vec<[f64; 2]> = (0..x0.len())
        .map(|i| {
            let s = |c: usize| k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c];
            [x0[i][0] + dt / 6.0 * s(0), x0[i][1] + dt / 6.0 * s(1)]
        })
        .collect();
    Ok(curve.with_lifted(&x1))
}

/// Frozen small-scale operator on the periodic part of each loop.
struct SmallScale {
    /// `(offset, N, loop length, winding)` per loop.
    loops: Vec<(usize, usize, f64, [f64; 2])>,
    kind: FlowKind,
}

impl SmallScale {
    fn new(curve: &PeriodicCurve, kind: FlowKind) -> Self {
        let offsets = curve.offsets();
        let loops = curve
            .loops()
            .iter()
            .zip(curve.frames())
            .enumerate()
            .map(|(i, (l, f))| (offsets[i], l.len(), f.length, [l.winding()[0] as f64, l.winding()[1] as f64]))
            .collect();
        Self { loops, kind }
    }

    fn symbol(&self, m: i64, length: f64) -> f64 {
        let q = 2.0 * PI * m as f64 / length;
        match self.kind {
            FlowKind::Sd => -q.powi(4),
            FlowKind::Ms => -2.0 * q.abs().powi(3),
        }
    }

    /// Apply `f(symbol)` to the periodic part of each component of `x`;
    /// `keep_linear` re-adds the winding ramp afterwards.
    fn map(&self, x: &[[f64; 2]], keep_linear: bool, f: impl Fn(f64) -> f64) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; x.len()];
        for &(start, n, length, w) in &self.loops {
            for c in 0..2 {
                let p: Vec<f64> = (0..n).map(|j| x[start + j][c] - w[c] * j as f64 / n as f64).collect();
                let q = spectral::apply_multiplier(&p, |m| f(self.symbol(m, length)));
                for j in 0..n {
                    out[start + j][c] = q[j];
                    if keep_linear {
                        // the mean mode has symbol 0, so f(0) = 1 keeps it
                        out[start + j][c] += w[c] * j as f64 / n as f64;
                    }
                }
            }
        }
        out
    }
}

/// One ARS(2,2,2) implicit–explicit step, without redistribution.
pub fn ssd_advance(curve: &PeriodicCurve, dt: f64, kind: FlowKind, gamma: f64, green: &PeriodicGreen) -> Result<PeriodicCurve> {
    let g = 1.0 - 1.0 / 2f64.sqrt();
    let d = 1.0 - 1.0 / (2.0 * g);
    let lin = SmallScale::new(curve, kind);
    let explicit = |c: &PeriodicCurve, x: &[[f64; 2]]| -> Result<Vec<[f64; 2]>> {
        let f = velocity_field(c, kind, gamma, green)?;
        let lx = lin.map(x, false, |s| s);
        Ok(f.iter().zip(&lx).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect())
    };
    let solve = |rhs: &[[f64; 2]]| lin.map(rhs, true, |s| 1.0 / (1.0 - g * dt * s));
    let x0 = curve.lifted_points();
    let e1 = explicit(curve, &x0)?;
    let y2 = solve(&axpy(&x0, g * dt, &e1));
    let c2 = curve.with_lifted(&y2);
    let e2 = explicit(&c2, &y2)?;
    let ly2 = lin.map(&y2, false, |s| s);
    let rhs: Vec<[f64; 2]> = (0..x0.len())
        .map(|i| {
            let r = |c: usize| x0[i][c] + dt * (d * e1[i][c] + (1.0 - d) * e2[i][c] + (1.0 - g) * ly2[i][c]);
            [r(0), r(1)]
        })
        .collect();
    Ok(curve.with_lifted(&solve(&rhs)))
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub dt: f64,
    pub volume_correction: f64,
}

/// Advance, redistribute, restore the area, and re-evaluate.
pub fn step(state: &FlowState, dt: f64, config: &FlowConfig) -> Result<(FlowState, StepInfo)> {
    let moved = match config.scheme {
        Scheme::Rk4 => rk4_advance(&state.curve, dt, state.kind, state.gamma, &state.green)?,
        Scheme::Ssd => ssd_advance(&state.curve, dt, state.kind, state.gamma, &state.green)?,
    };
    let resampled = resample_equal_arclength(&moved, state.markers_per_loop())?;
    let (curve, delta) = enforce_volume(&resampled, state.target_area, config.area_tol)?;
    let cached = Some(evaluate(&curve, state.kind, state.gamma, &state.green)?);
    let next = FlowState { time: state.time + dt, curve, cached, ..state.clone() };
    Ok((next, StepInfo { dt, volume_correction: delta }))
}

/// Thresholds of the stopping-time surveillance.
#[derive(Debug, Clone)]
pub struct StoppingMonitor {
    /// Bound on `sup|ψ| + sup|ψ′|` over the reference.
    pub eps0: f64,
    /// The run stops once the dissipation reaches `2·delta0`.
    pub delta0: f64,
    pub reference: Option<PeriodicCurve>,
}

impl Default for StoppingMonitor {
    fn default() -> Self {
        Self { eps0: f64::INFINITY, delta0: f64::INFINITY, reference: None }
    }
}

/// `C¹` size of the height function: spectral and finite-difference estimates.
pub fn psi_c1(curve: &PeriodicCurve, reference: &PeriodicCurve) -> Result<(f64, f64, CurveSamples)> {
    let psi = height_function(curve, reference)?;
    let sup = psi.max_abs();
    let spec = reference.map_loops(&psi.values, |f, p| f.d_s(p));
    let fd = reference.map_loops(&psi.values, |f, p| {
        let n = p.len();
        (0..n)
            .map(|j| {
                let (a, b) = (p[(j + n - 1) % n], p[(j + 1) % n]);
                (b - a) / (f.weights[(j + n - 1) % n] + f.weights[j])
            })
            .collect()
    });
    let m = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok((sup + m(&spec), sup + m(&fd), psi))
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub curve: PeriodicCurve,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: EnergyTrace,
    pub snapshots: Vec<Snapshot>,
    pub final_state: FlowState,
    pub event: Option<(StopReason, String)>,
    pub steps: usize,
}

fn record(state: &mut FlowState, volume_correction: f64, monitor: &StoppingMonitor) -> Result<(TraceRecord, Option<(StopReason, String)>)> {
    let ev = state.evaluation()?.clone();
    let area = enclosed_area(&state.curve)?;
    let mut event = None;
    let (mut c1, mut c1_fd) = (f64::NAN, f64::NAN);
    if let Some(reference) = &monitor.reference {
        match psi_c1(&state.curve, reference) {
            Ok((a, b, _)) => {
                c1 = a;
                c1_fd = b;
                if a >= monitor.eps0 {
                    event = Some((StopReason::C1Threshold, format!("‖ψ‖_C¹ = {a:.3e} ≥ ε₀ = {:.3e}", monitor.eps0)));
                }
            }
            Err(Error::GraphFailure(m)) => event = Some((StopReason::GraphFailure, m)),
            Err(e) => return Err(e),
        }
    }
    if event.is_none() && ev.dissipation >= 2.0 * monitor.delta0 {
        event = Some((
            StopReason::Dissipation,
            format!("dissipation {:.3e} ≥ 2δ₀ = {:.3e}", ev.dissipation, 2.0 * monitor.delta0),
        ));
    }
    let rec = TraceRecord {
        t: state.time,
        energy: ev.energy,
        perimeter: ev.perimeter,
        nonlocal: ev.nonlocal,
        area,
        dissipation: ev.dissipation,
        volume_correction,
        psi_c1: c1,
        psi_c1_fd: c1_fd,
        identity1_residual: f64::NAN,
        event: event.as_ref().map(|e| e.0),
    };
    Ok((rec, event))
}

/// Integrate to `t_end` or until a stopping event. Geometry failures during a
/// step are reported as graph-failure events, not errors.
pub fn run(initial: FlowState, monitor: &StoppingMonitor, t_end: f64, config: &FlowConfig) -> Result<RunOutput> {
    let mut state = initial;
    let mut trace = EnergyTrace::default();
    let mut snapshots = vec![Snapshot { time: state.time, curve: state.curve.clone() }];
    let (rec, mut event) = record(&mut state, 0.0, monitor)?;
    trace.records.push(rec);
    let mut steps = 0;
    while event.is_none() && state.time < t_end && steps < config.max_steps {
        let mut dt = adaptive_dt(&mut state, config)?;
        let remaining = t_end - state.time;
        // land on t_end without a sliver step
        if dt >= remaining {
            dt = remaining;
        } else if dt > 0.5 * remaining {
            dt = 0.5 * remaining;
        }
        if dt < config.min_dt {
            event = Some((StopReason::DtUnderflow, format!("dt = {dt:.3e} below {:.3e}", config.min_dt)));
            break;
        }
        let (next, info) = match step(&state, dt, config) {
            Ok(r) => r,
            Err(e @ (Error::Topology(_) | Error::GraphFailure(_))) => {
                event = Some((StopReason::GraphFailure, e.to_string()));
                break;
            }
            Err(e) => return Err(e),
        };
        state = next;
        steps += 1;
        let (rec, ev) = record(&mut state, info.volume_correction, monitor)?;
        trace.records.push(rec);
        event = ev;
        if config.snapshot_every > 0 && steps % config.snapshot_every == 0 {
            snapshots.push(Snapshot { time: state.time, curve: state.curve.clone() });
        }
    }
    if let (Some((reason, _)), Some(last)) = (&event, trace.records.last_mut()) {
        last.event = Some(*reason);
    }
    trace.fill_identity_residuals();
    Ok(RunOutput { trace, snapshots, final_state: state, event, steps })
}
