//! Energy bookkeeping along runs, the two energy identities, distances to a
//! reference set, and exponential-decay fits.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{dirichlet_energy, potential_of_set, rasterize_indicator};
use crate::flow::{evaluate, sd_normal_velocity, FlowKind};
use crate::geometry::{perimeter, signed_distance_grid, CurveSamples, PeriodicCurve};
use crate::green::PeriodicGreen;
use crate::layer::assemble_with_potential;
use crate::ms::ms_normal_velocity;
use crate::spectral;
use crate::variation::{criticality_residual, second_variation_form};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GraphFailure,
    C1Threshold,
    Dissipation,
    DtUnderflow,
}

impl StopReason {
    pub fn code(&self) -> &'static str {
        match self {
            StopReason::GraphFailure => "graph_failure",
            StopReason::C1Threshold => "c1_threshold",
            StopReason::Dissipation => "dissipation",
            StopReason::DtUnderflow => "dt_underflow",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    #[serde(rename = "J")]
    pub energy: f64,
    pub perimeter: f64,
    pub nonlocal: f64,
    pub area: f64,
    pub dissipation: f64,
    pub volume_correction: f64,
    /// `sup|ψ| + sup|ψ′|` with a spectral `ψ′`; NaN without a reference.
    pub psi_c1: f64,
    /// The same with a centred finite-difference `ψ′`.
    pub psi_c1_fd: f64,
    pub identity1_residual: f64,
    pub event: Option<StopReason>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExpFit {
    pub c0: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub records: Vec<TraceRecord>,
    pub fitted: Option<ExpFit>,
}

/// Columns addressable for fits and plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Energy,
    Perimeter,
    Nonlocal,
    Area,
    Dissipation,
    PsiC1,
}

impl Column {
    pub fn get(&self, r: &TraceRecord) -> f64 {
        match self {
            Column::Energy => r.energy,
            Column::Perimeter => r.perimeter,
            Column::Nonlocal => r.nonlocal,
            Column::Area => r.area,
            Column::Dissipation => r.dissipation,
            Column::PsiC1 => r.psi_c1,
        }
    }
}

impl EnergyTrace {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, c: Column) -> Vec<f64> {
        self.records.iter().map(|r| c.get(r)).collect()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "t,J,perimeter,nonlocal,area,dissipation,volume_correction,psi_c1,event")?;
        for r in &self.records {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.t,
                r.energy,
                r.perimeter,
                r.nonlocal,
                r.area,
                r.dissipation,
                r.volume_correction,
                r.psi_c1,
                r.event.map_or("", |e| e.code())
            )?;
        }
        Ok(())
    }

    /// Fill `identity1_residual` on interior records.
    pub fn fill_identity_residuals(&mut self) {
        if let Ok(rep) = verify_first_identity(self) {
            for (i, r) in rep.residuals.iter().enumerate() {
                self.records[i + 1].identity1_residual = *r;
            }
        }
    }

    /// Fit `column ∝ e^{−c₀t}` on records with `t ∈ window` and store it.
    pub fn fit(&mut self, column: Column, window: (f64, f64)) -> Result<ExpFit> {
        let (t, y): (Vec<f64>, Vec<f64>) = self
            .records
            .iter()
            .filter(|r| r.t >= window.0 && r.t <= window.1)
            .map(|r| (r.t, column.get(r)))
            .unzip();
        let f = fit_exponential(&t, &y)?;
        self.fitted = Some(f);
        Ok(f)
    }
}

/// `(J, perimeter, ∫|Dv_E|²)` with the boundary-integral potential.
pub fn energy(curve: &PeriodicCurve, gamma: f64, green: &PeriodicGreen) -> (f64, f64, f64) {
    let p = perimeter(curve);
    if gamma == 0.0 {
        return (p, p, 0.0);
    }
    let (_, pot) = assemble_with_potential(curve, green);
    (p + gamma * pot.nonlocal_energy, p, pot.nonlocal_energy)
}

/// The same through the rasterised indicator on an `n×n` grid.
pub fn energy_grid(curve: &PeriodicCurve, gamma: f64, n: usize, width_cells: f64) -> Result<(f64, f64, f64)> {
    let p = perimeter(curve);
    let (v, _) = potential_of_set(curve, n, width_cells)?;
    let e = dirichlet_energy(&v);
    Ok((p + gamma * e, p, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstIdentityReport {
    /// One entry per interior record.
    pub residuals: Vec<f64>,
    pub max: f64,
    pub median: f64,
}

/// `|lhs − rhs| / max(|lhs|, |rhs|, floor)`, zero when both sides are below the floor.
pub fn relative_residual(lhs: f64, rhs: f64, floor: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale < floor {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Compare `−dJ/dt` (three-point difference on the possibly non-uniform time
/// grid) with the recorded dissipation. The floor is the round-off level of
/// the difference quotient, `10³ ε |J| / Δt`.
pub fn verify_first_identity(trace: &EnergyTrace) -> Result<FirstIdentityReport> {
    let r = &trace.records;
    if r.len() < 3 {
        return Err(Error::InvalidInput(format!("{} records; need at least 3", r.len())));
    }
    let mut residuals = Vec::with_capacity(r.len() - 2);
    for i in 1..r.len() - 1 {
        let (h1, h2) = (r[i].t - r[i - 1].t, r[i + 1].t - r[i].t);
        let d = -h2 / (h1 * (h1 + h2)) * r[i - 1].energy
            + (h2 - h1) / (h1 * h2) * r[i].energy
            + h1 / (h2 * (h1 + h2)) * r[i + 1].energy;
        let floor = 1e3 * f64::EPSILON * r[i].energy.abs() / (h1 + h2);
        residuals.push(relative_residual(-d, r[i].dissipation, floor));
    }
    let max = residuals.iter().fold(0.0f64, |m, x| m.max(*x));
    let median = median(&residuals);
    Ok(FirstIdentityReport { residuals, max, median })
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub breakdown: BTreeMap<String, f64>,
    pub criticality_linf: f64,
    pub delta_t: f64,
}

impl IdentityReport {
    fn new(lhs: f64, rhs: f64, breakdown: BTreeMap<String, f64>, criticality_linf: f64, delta_t: f64) -> Self {
        let floor = 1e-14 * breakdown.values().fold(1.0f64, |m, x| m.max(x.abs()));
        Self {
            lhs,
            rhs,
            residual: lhs - rhs,
            relative_residual: relative_residual(lhs, rhs, floor),
            breakdown,
            criticality_linf,
            delta_t,
        }
    }
}

fn half_dissipation(curve: &PeriodicCurve, kind: FlowKind, gamma: f64, green: &PeriodicGreen) -> Result<f64> {
    Ok(0.5 * evaluate(curve, kind, gamma, green)?.dissipation)
}

fn virtual_lhs(curve: &PeriodicCurve, v: &[f64], kind: FlowKind, gamma: f64, dt: f64, green: &PeriodicGreen) -> Result<f64> {
    let fwd = curve.displaced(&v.iter().map(|x| x * dt).collect::<Vec<_>>());
    let bwd = curve.displaced(&v.iter().map(|x| -x * dt).collect::<Vec<_>>());
    Ok((half_dissipation(&fwd, kind, gamma, green)? - half_dissipation(&bwd, kind, gamma, green)?) / (2.0 * dt))
}

/// `d/dt ½∫|Dw|² = −∂²J[V] + ½∫(∂_νw⁺ + ∂_νw⁻) V² ds` at `curve`, the left side
/// by a centred difference over virtual steps `±δt` along `V ν`.
pub fn verify_second_identity_ms(curve: &PeriodicCurve, gamma: f64, delta_t: f64, green: &PeriodicGreen) -> Result<IdentityReport> {
    let e = ms_normal_velocity(curve, gamma, green)?;
    let v = &e.velocity.values;
    let lhs = virtual_lhs(curve, v, FlowKind::Ms, gamma, delta_t, green)?;
    let form = second_variation_form(curve, gamma, v, green);
    let (plus, minus) = &e.solution.one_sided;
    let cubic = 0.5
        * curve.integrate(
            &v.iter().zip(&plus.values).zip(&minus.values).map(|((v, p), m)| (p + m) * v * v).collect::<Vec<_>>(),
        );
    let mut b = BTreeMap::new();
    b.insert("form_local".into(), form.local);
    b.insert("form_curvature".into(), form.curvature);
    b.insert("form_nonlocal".into(), form.nonlocal);
    b.insert("form_potential".into(), form.potential);
    b.insert("second_variation".into(), form.total());
    b.insert("cubic_one_sided".into(), cubic);
    let crit = criticality_residual(curve, gamma, green).linf;
    Ok(IdentityReport::new(lhs, -form.total() + cubic, b, crit, delta_t))
}

/// `d/dt ½∫|D_sH|² = −∂²J[Δ_sH] − ∫κ|∂_sH|²Δ_sH + ½∫H|∂_sH|²Δ_sH` at `curve` (`γ = 0`).
pub fn verify_second_identity_sd(curve: &PeriodicCurve, delta_t: f64) -> Result<IdentityReport> {
    let green = PeriodicGreen::default();
    let v = sd_normal_velocity(curve).values;
    let lhs = virtual_lhs(curve, &v, FlowKind::Sd, 0.0, delta_t, &green)?;
    let form = second_variation_form(curve, 0.0, &v, &green);
    let h = curve.kappa();
    let hs = curve.map_loops(&h, |f, k| f.d_s(k));
    let b_term = curve.integrate(&(0..v.len()).map(|i| h[i] * hs[i] * hs[i] * v[i]).collect::<Vec<_>>());
    let h_term = 0.5 * b_term;
    let mut b = BTreeMap::new();
    b.insert("form_local".into(), form.local);
    b.insert("form_curvature".into(), form.curvature);
    b.insert("second_variation".into(), form.total());
    b.insert("cubic_second_fundamental_form".into(), -b_term);
    b.insert("cubic_mean_curvature".into(), h_term);
    let crit = criticality_residual(curve, 0.0, &green).linf;
    Ok(IdentityReport::new(lhs, -form.total() - b_term + h_term, b, crit, delta_t))
}

/// `D(E) = ∫_{EΔF} |d_F| dx` and `|EΔF|`, by grid quadrature with the
/// anti-aliased indicators weighting partial cells.
pub fn asymmetry_distance(curve: &PeriodicCurve, reference: &PeriodicCurve, n: usize) -> Result<(f64, f64)> {
    let ue = rasterize_indicator(curve, n, 1.5)?;
    let uf = rasterize_indicator(reference, n, 1.5)?;
    let df = signed_distance_grid(reference, n)?;
    let cell = 1.0 / (n * n) as f64;
    let (mut d, mut area) = (0.0, 0.0);
    for k in 0..n * n {
        let m = 0.5 * (ue.values[k] - uf.values[k]).abs();
        area += m * cell;
        d += m * df.values[k].abs() * cell;
    }
    Ok((d, area))
}

/// Least-squares line through `(t, ln y)`; `c₀ = −slope`.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<ExpFit> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("column must be positive on the fit window".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (slope, _, r2) = linear_fit(t, &ly);
    Ok(ExpFit { c0: -slope, r2, window: (t[0], t[t.len() - 1]) })
}

/// `(slope, intercept, r²)` of the least-squares line; `r² = 1` for an exact
/// (including constant) fit.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if ss_tot <= 1e-30 * (1.0 + my * my) { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// `Σ_loops Σ_m (1 + k_m²)^s |ψ̂_m|²` with `k_m = 2πm/L` on each reference loop
/// and mean-normalised coefficients. It is the square of a Sobolev norm.
pub fn discrete_sobolev_norm(psi: &CurveSamples, reference: &PeriodicCurve, s: f64) -> Result<f64> {
    if psi.len() != reference.n_markers() {
        return Err(Error::InvalidInput("ψ does not match the reference markers".into()));
    }
    let mut total = 0.0;
    for (vals, f) in psi.per_loop(reference).into_iter().zip(reference.frames()) {
        let n = vals.len();
        let c = spectral::coefficients(vals);
        for (j, cj) in c.iter().enumerate() {
            let k = 2.0 * PI * spectral::wavenumber(j, n) as f64 / f.length;
            total += (1.0 + k * k).powf(s) * cj.norm_sqr();
        }
    }
    Ok(total)
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    linear_fit(&lx, &ly).0
}
