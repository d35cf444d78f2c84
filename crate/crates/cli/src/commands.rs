//! The three workflows. Each writes its files under
//! `<output.dir>/<config hash prefix>/` and returns a JSON-ready summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use torusflow::diagnostics::{
    discrete_sobolev_norm, verify_first_identity, verify_second_identity_ms, verify_second_identity_sd, Column,
    EnergyTrace, FirstIdentityReport, IdentityReport, StopReason,
};
use torusflow::flow::{adaptive_dt, psi_c1, run, FlowConfig, FlowKind, FlowState, Scheme, StoppingMonitor};
use torusflow::geometry::{enclosed_area, height_function, PeriodicCurve};
use torusflow::green::PeriodicGreen;
use torusflow::io::write_snapshot_with_comment;
use torusflow::variation::{
    assemble_second_variation, geometric_poincare_ratio, lamella_threshold, spectrum, Classification, LamellaSweep,
    NonlocalRoute, SpectrumReport, ThresholdResult,
};

use crate::config::{resolved_toml, Loaded, Reference, Route, Shape};
use crate::error::{CliError, CliResult};
use crate::shapes::{build, mean_shift};
use crate::svg;

/// Outcome of one command: the exit code it asks for and where it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: PathBuf,
    pub message: Option<String>,
}

pub fn hash_line(hash: &str) -> String {
    format!("config_hash={hash}")
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn new(loaded: &Loaded) -> CliResult<Self> {
        let dir = loaded.output_dir();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut out = Self { dir, files: Vec::new() };
        out.text("scenario.toml", &resolved_toml(loaded)?)?;
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let p = self.path(name);
        let f = File::create(&p).map_err(|e| CliError::io(&p, e))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        let p = self.path(name);
        let mut w = self.create(name)?;
        w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(p, e))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let body = serde_json::to_string_pretty(value).map_err(|e| CliError::Invariant(e.to_string()))?;
        self.text(name, &(body + "\n"))?;
        Ok(self.path(name))
    }

    fn snapshot(&mut self, name: &str, curve: &PeriodicCurve, hash: &str) -> CliResult<()> {
        let p = self.path(name);
        let w = self.create(name)?;
        write_snapshot_with_comment(curve, Some(&hash_line(hash)), w).map_err(|e| match e {
            torusflow::Error::Io(io) => CliError::io(p, io),
            other => other.into(),
        })
    }

    fn trace(&mut self, name: &str, trace: &EnergyTrace, hash: &str) -> CliResult<()> {
        let p = self.path(name);
        let mut w = self.create(name)?;
        writeln!(w, "# {}", hash_line(hash)).map_err(|e| CliError::io(&p, e))?;
        trace.write_csv(&mut w)?;
        w.flush().map_err(|e| CliError::io(p, e))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventInfo {
    pub reason: StopReason,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decay {
    /// Fitted rate of `dissipation ∝ e^{−c₀t}`.
    pub c0: Option<f64>,
    pub r2: Option<f64>,
    pub window: [f64; 2],
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PsiSummary {
    pub sup: f64,
    pub c1: f64,
    pub sobolev_s: f64,
    /// `Σ(1+k²)^s |ψ̂_k|²`.
    pub sobolev: f64,
    pub reference_shift: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentitySummary {
    pub median: f64,
    pub max: f64,
}

impl From<&FirstIdentityReport> for IdentitySummary {
    fn from(r: &FirstIdentityReport) -> Self {
        Self { median: r.median, max: r.max }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub config_hash: String,
    pub command: &'static str,
    pub exit_code: i32,
    pub flow: FlowKind,
    pub gamma: f64,
    pub scheme: Scheme,
    pub markers: usize,
    pub steps: usize,
    pub t_final: f64,
    pub event: Option<EventInfo>,
    pub energy_initial: f64,
    pub energy_final: f64,
    /// Accepted steps on which `J` rose by more than `1e-9·|J|`.
    pub energy_increases: usize,
    pub area_initial: f64,
    pub area_drift: f64,
    pub decay: Decay,
    pub psi: Option<PsiSummary>,
    pub psi_note: Option<String>,
    pub first_identity: Option<IdentitySummary>,
    pub files: Vec<String>,
}

fn decay(trace: &mut EnergyTrace, window: [f64; 2], stationary_tol: f64) -> Decay {
    let t_final = trace.records.last().map_or(0.0, |r| r.t);
    let w = [window[0] * t_final, window[1] * t_final];
    let in_window: Vec<f64> = trace.records.iter().filter(|r| r.t >= w[0] && r.t <= w[1]).map(|r| r.dissipation).collect();
    if in_window.is_empty() {
        return Decay { c0: None, r2: None, window: w, note: Some("no records in the fit window".into()) };
    }
    // the integrated dissipation is the energy drop
    let (j0, j1) = (trace.records[0].energy, trace.records[trace.records.len() - 1].energy);
    if (j0 - j1).abs() <= stationary_tol * j0.abs() {
        return Decay { c0: Some(0.0), r2: None, window: w, note: Some(format!("energy change ≤ {stationary_tol:e}·|J|: stationary")) };
    }
    match trace.fit(Column::Dissipation, (w[0], w[1])) {
        Ok(f) => Decay { c0: Some(f.c0), r2: Some(f.r2), window: w, note: None },
        Err(e) => Decay { c0: None, r2: None, window: w, note: Some(e.to_string()) },
    }
}

fn final_psi(loaded: &Loaded, base: &PeriodicCurve, curve: &PeriodicCurve, kind: FlowKind) -> torusflow::Result<PsiSummary> {
    let m = &loaded.scenario.monitor;
    let shift = if m.recenter { mean_shift(base, curve) } else { [0.0, 0.0] };
    let reference = base.translated(shift);
    let psi = height_function(curve, &reference)?;
    let (c1, _, _) = psi_c1(curve, &reference)?;
    let s = m.sobolev_s(kind);
    Ok(PsiSummary { sup: psi.max_abs(), c1, sobolev_s: s, sobolev: discrete_sobolev_norm(&psi, &reference, s)?, reference_shift: shift })
}

fn monitor(loaded: &Loaded, base: &PeriodicCurve) -> StoppingMonitor {
    let m = &loaded.scenario.monitor;
    // ψ is tracked along the run only where the base is a meaningful reference
    let track = m.reference == Reference::Base && (m.eps0.is_some() || loaded.scenario.geometry.shape == Shape::Perturbed);
    StoppingMonitor {
        eps0: m.eps0.unwrap_or(f64::INFINITY),
        delta0: m.delta0.unwrap_or(f64::INFINITY),
        reference: track.then(|| base.clone()),
    }
}

pub fn simulate(loaded: &Loaded) -> CliResult<Outcome> {
    let s = &loaded.scenario;
    let init = build(loaded)?;
    let state = FlowState::new(init.curve.clone(), s.flow.kind, s.flow.gamma)?;
    let area0 = state.target_area;
    let mut out = run(state, &monitor(loaded, &init.base), s.flow.t_end, &s.flow.config())?;

    let energies = out.trace.column(Column::Energy);
    let energy_increases = energies.windows(2).filter(|w| w[1] - w[0] > 1e-9 * w[0].abs()).count();
    let area_final = enclosed_area(&out.final_state.curve)?;
    let area_drift = (area_final - area0).abs() / area0;
    let decay = decay(&mut out.trace, s.monitor.fit_window, s.monitor.stationary_tol);
    let (psi, psi_note) = match s.monitor.reference {
        Reference::None => (None, Some("no reference".to_string())),
        Reference::Base => match final_psi(loaded, &init.base, &out.final_state.curve, s.flow.kind) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let first_identity = verify_first_identity(&out.trace).ok().map(|r| IdentitySummary::from(&r));
    let event = out.event.clone().map(|(reason, message)| EventInfo { reason, message });
    let exit_code = if event.is_some() { 1 } else { 0 };

    let mut files = Out::new(loaded)?;
    files.trace("trace.csv", &out.trace, &loaded.hash)?;
    for (i, snap) in out.snapshots.iter().enumerate().skip(1) {
        files.snapshot(&format!("snapshot_{i:05}.csv"), &snap.curve, &loaded.hash)?;
    }
    files.snapshot("initial.csv", &init.curve, &loaded.hash)?;
    files.snapshot("final.csv", &out.final_state.curve, &loaded.hash)?;
    if s.output.plots {
        let meta = vec![hash_line(&loaded.hash)];
        files.text("dissipation.svg", &svg::render(&dissipation_plot(&[("dissipation".into(), &out.trace)], meta.clone()))?)?;
        let curves = [
            (format!("t = {}", svg::format_tick(0.0)), init.curve.clone()),
            (format!("t = {}", svg::format_tick(out.final_state.time)), out.final_state.curve.clone()),
        ];
        files.text("curve.svg", &svg::render_curves("interface", &curves, &meta)?)?;
    }
    files.files.push("simulate.json".into());
    let summary = SimulateSummary {
        config_hash: loaded.hash.clone(),
        command: "simulate",
        exit_code,
        flow: s.flow.kind,
        gamma: s.flow.gamma,
        scheme: s.flow.scheme,
        markers: s.grid.markers,
        steps: out.steps,
        t_final: out.final_state.time,
        event: event.clone(),
        energy_initial: energies.first().copied().unwrap_or(f64::NAN),
        energy_final: energies.last().copied().unwrap_or(f64::NAN),
        energy_increases,
        area_initial: area0,
        area_drift,
        decay,
        psi,
        psi_note,
        first_identity,
        files: files.files.clone(),
    };
    let path = files.json("simulate.json", &summary)?;
    if !energies.iter().all(|e| e.is_finite()) {
        return Err(CliError::Invariant("non-finite energy in the trace".into()));
    }
    if (area_final - area0).abs() > s.flow.area_tol {
        return Err(CliError::Invariant(format!("area drifted by {:.3e} beyond area_tol", (area_final - area0).abs())));
    }
    Ok(Outcome { exit_code, summary: path, message: event.map(|e| format!("stopping event {}: {}", e.reason.code(), e.message)) })
}

pub fn dissipation_plot(traces: &[(String, &EnergyTrace)], metadata: Vec<String>) -> svg::Plot {
    svg::Plot {
        title: "dissipation".into(),
        x_label: "t".into(),
        y_label: "dissipation".into(),
        log_y: true,
        style: svg::Style::Line,
        series: traces
            .iter()
            .map(|(label, t)| svg::Series {
                label: label.clone(),
                points: t.records.iter().map(|r| [r.t, r.dissipation]).collect(),
            })
            .collect(),
        metadata,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Probe {
    pub count: usize,
    pub min_quotient: f64,
    pub max_quotient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaReport {
    pub gamma: f64,
    /// `None` when the geometry is not critical: no verdict is given.
    pub classification: Option<Classification>,
    pub spectrum: SpectrumReport,
    pub probes: Probe,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySummary {
    pub config_hash: String,
    pub command: &'static str,
    pub exit_code: i32,
    pub markers: usize,
    pub poincare_ratio: Option<f64>,
    pub poincare_infinite: bool,
    pub reports: Vec<GammaReport>,
    pub threshold: Option<Vec<ThresholdResult>>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

/// Rayleigh quotients of random combinations of the eigenvectors outside
/// the translations; by min–max they must stay within the spectrum.
fn probes(rep: &SpectrumReport, total: &nalgebra::DMatrix<f64>, gram: &nalgebra::DMatrix<f64>, count: usize, rng: &mut ChaCha8Rng) -> CliResult<Probe> {
    let keep: Vec<usize> = (0..rep.eigenvalues.len()).filter(|i| !rep.translation_modes.contains(i)).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    if keep.is_empty() {
        return Ok(Probe { count: 0, min_quotient: f64::NAN, max_quotient: f64::NAN });
    }
    let top = keep.iter().map(|&i| rep.eigenvalues[i]).fold(f64::NEG_INFINITY, f64::max);
    let scale = rep.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for _ in 0..count {
        let mut c = DVector::zeros(total.nrows());
        for &i in &keep {
            let a: f64 = rng.random_range(-1.0..1.0);
            c += DVector::from_column_slice(&rep.eigenvectors[i]) * a;
        }
        let q = (c.transpose() * total * &c)[(0, 0)] / (c.transpose() * gram * &c)[(0, 0)];
        lo = lo.min(q);
        hi = hi.max(q);
    }
    let tol = 1e-8 * scale;
    if lo < rep.gap_on_t_perp - tol || hi > top + tol {
        return Err(CliError::Invariant(format!(
            "probe quotients [{lo:.6e}, {hi:.6e}] leave the spectrum range [{:.6e}, {top:.6e}]",
            rep.gap_on_t_perp
        )));
    }
    Ok(Probe { count, min_quotient: lo, max_quotient: hi })
}

pub fn stability(loaded: &Loaded) -> CliResult<Outcome> {
    let s = &loaded.scenario;
    let st = &s.stability;
    let curve = build(loaded)?.curve;
    let green = PeriodicGreen::default();
    let route = match s.grid.route {
        Route::Boundary => NonlocalRoute::Boundary,
        Route::Grid => NonlocalRoute::Grid { n: s.grid.raster, sigma_cells: s.grid.sigma_cells },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    for &gamma in &st.gammas {
        let m = assemble_second_variation(&curve, gamma, st.n_modes, route, &green)?;
        let rep = spectrum(&m, &curve)?;
        let probes = probes(&rep, &m.total(), &m.gram, st.probes, &mut rng)?;
        for w in &rep.warnings {
            let w = format!("γ = {gamma}: {w}");
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        reports.push(GammaReport { gamma, classification: rep.critical.then_some(rep.classification), spectrum: rep, probes });
    }
    let threshold = if st.threshold_sweep {
        let sweep = LamellaSweep { h: st.sweep_h, markers: st.sweep_markers, n_modes: st.n_modes };
        let table = st.gammas.iter().map(|&g| lamella_threshold(g, st.k_max, &sweep, &green)).collect::<torusflow::Result<Vec<_>>>()?;
        let ks: Vec<usize> = table.iter().map(|r| r.k.unwrap_or(usize::MAX)).collect();
        let mut sorted: Vec<(f64, usize)> = st.gammas.iter().copied().zip(ks).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted.windows(2).any(|w| w[1].1 < w[0].1) {
            warnings.push("k(γ) is not nondecreasing over the listed γ".into());
        }
        Some(table)
    } else {
        None
    };
    let poincare = geometric_poincare_ratio(&curve);

    let mut files = Out::new(loaded)?;
    if s.output.plots {
        let plot = svg::Plot {
            title: "second-variation spectrum".into(),
            x_label: "index".into(),
            y_label: "eigenvalue".into(),
            log_y: false,
            style: svg::Style::Stem,
            series: reports
                .iter()
                .map(|r| svg::Series {
                    label: format!("γ = {}", svg::format_tick(r.gamma)),
                    points: r.spectrum.eigenvalues.iter().enumerate().map(|(i, v)| [i as f64, *v]).collect(),
                })
                .collect(),
            metadata: vec![hash_line(&loaded.hash)],
        };
        files.text("spectrum.svg", &svg::render(&plot)?)?;
    }
    files.files.push("stability.json".into());
    let summary = StabilitySummary {
        config_hash: loaded.hash.clone(),
        command: "stability",
        exit_code: 0,
        markers: s.grid.markers,
        poincare_ratio: poincare.ratio,
        poincare_infinite: poincare.is_infinite(),
        reports,
        threshold,
        warnings: warnings.clone(),
        files: files.files.clone(),
    };
    let path = files.json("stability.json", &summary)?;
    Ok(Outcome { exit_code: 0, summary: path, message: (!warnings.is_empty()).then(|| warnings.join("; ")) })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub config_hash: String,
    pub command: &'static str,
    pub exit_code: i32,
    pub flow: FlowKind,
    pub steps: usize,
    pub event: Option<EventInfo>,
    pub first_identity: FirstIdentityReport,
    pub second_identity_ms: IdentityReport,
    pub second_identity_sd: IdentityReport,
    pub files: Vec<String>,
}

fn virtual_dt(curve: &PeriodicCurve, kind: FlowKind, gamma: f64, explicit: Option<f64>) -> CliResult<f64> {
    if let Some(dt) = explicit {
        return Ok(dt);
    }
    let mut st = FlowState::new(curve.clone(), kind, gamma)?;
    Ok(adaptive_dt(&mut st, &FlowConfig::default())? / crate::defaults::VERIFY_DT_DIVISOR)
}

pub fn verify(loaded: &Loaded) -> CliResult<Outcome> {
    let s = &loaded.scenario;
    let init = build(loaded)?;
    let green = PeriodicGreen::default();
    let mut config = s.flow.config();
    config.max_steps = s.verify.steps;
    let state = FlowState::new(init.curve.clone(), s.flow.kind, s.flow.gamma)?;
    let out = run(state, &StoppingMonitor::default(), s.flow.t_end, &config)?;
    let first = verify_first_identity(&out.trace)?;
    let ms_gamma = if s.flow.kind == FlowKind::Ms { s.flow.gamma } else { 0.0 };
    let ms = verify_second_identity_ms(
        &init.curve,
        ms_gamma,
        virtual_dt(&init.curve, FlowKind::Ms, ms_gamma, s.verify.delta_t)?,
        &green,
    )?;
    let sd = verify_second_identity_sd(&init.curve, virtual_dt(&init.curve, FlowKind::Sd, 0.0, s.verify.delta_t)?)?;
    let event = out.event.clone().map(|(reason, message)| EventInfo { reason, message });
    let exit_code = if event.is_some() { 1 } else { 0 };

    let mut files = Out::new(loaded)?;
    files.trace("verify_trace.csv", &out.trace, &loaded.hash)?;
    files.files.push("verify.json".into());
    let summary = VerifySummary {
        config_hash: loaded.hash.clone(),
        command: "verify",
        exit_code,
        flow: s.flow.kind,
        steps: out.steps,
        event: event.clone(),
        first_identity: first,
        second_identity_ms: ms,
        second_identity_sd: sd,
        files: files.files.clone(),
    };
    let path = files.json("verify.json", &summary)?;
    Ok(Outcome { exit_code, summary: path, message: event.map(|e| format!("stopping event {}: {}", e.reason.code(), e.message)) })
}

/// Trace CSV as written by `simulate`, comment lines skipped.
pub fn read_trace(path: &Path) -> CliResult<(EnergyTrace, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let comments: Vec<String> = text.lines().filter_map(|l| l.strip_prefix('#')).map(|l| l.trim().to_string()).collect();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let bad = |line: Option<u64>, message: String| CliError::Config {
        file: Some(path.to_path_buf()),
        line: line.map(|l| l as usize),
        key: None,
        message,
    };
    let headers = rdr.headers().map_err(|e| bad(None, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| bad(Some(1), format!("trace has no `{name}` column")));
    let (it, idis, ij) = (col("t")?, col("dissipation")?, col("J")?);
    let mut trace = EnergyTrace::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map(|p| p.line()), e.to_string()))?;
        let line = rec.position().map(|p| p.line());
        let num = |i: usize| rec.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad(line, format!("bad number in column {}", i + 1)));
        trace.records.push(torusflow::diagnostics::TraceRecord {
            t: num(it)?,
            energy: num(ij)?,
            perimeter: f64::NAN,
            nonlocal: f64::NAN,
            area: f64::NAN,
            dissipation: num(idis)?,
            volume_correction: f64::NAN,
            psi_c1: f64::NAN,
            psi_c1_fd: f64::NAN,
            identity1_residual: f64::NAN,
            event: None,
        });
    }
    Ok((trace, comments))
}
