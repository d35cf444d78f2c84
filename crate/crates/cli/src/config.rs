//! Scenario files: TOML with the sections `geometry`, `flow`, `grid`,
//! `monitor`, `output`, `stability` and `verify`, plus a top-level `seed`.
//!
//! Precedence is file < environment (`TORUSFLOW_<SECTION>_<KEY>`) < command
//! line (`--section.key=value`). Errors in the file carry its line number.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use torusflow::flow::{FlowConfig, FlowKind, Scheme};

use crate::defaults as d;
use crate::error::{CliError, CliResult};

pub const SECTIONS: [&str; 7] = ["geometry", "flow", "grid", "monitor", "output", "stability", "verify"];
pub const ENV_PREFIX: &str = "TORUSFLOW_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    Ellipse,
    Strip,
    Lamella,
    Perturbed,
    Snapshot,
}

/// Named shape plus the parameters it reads; unused keys must be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_inside: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    /// Strip direction in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    /// Number of strips of a lamella.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Per-loop amplitudes of a perturbed strip; overrides `amplitude`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<GeometrySpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSpec {
    pub kind: FlowKind,
    pub gamma: f64,
    pub scheme: Scheme,
    /// Stability constant; absent selects the per-flow, per-scheme default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_cfl: Option<f64>,
    pub t_end: f64,
    pub max_steps: usize,
    pub area_tol: f64,
    pub min_dt: f64,
    pub snapshot_every: usize,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self {
            kind: FlowKind::Sd,
            gamma: d::GAMMA,
            scheme: d::SCHEME,
            c_cfl: None,
            t_end: d::T_END,
            max_steps: d::MAX_STEPS,
            area_tol: d::AREA_TOL,
            min_dt: d::MIN_DT,
            snapshot_every: d::SNAPSHOT_EVERY,
        }
    }
}

impl FlowSpec {
    pub fn config(&self) -> FlowConfig {
        FlowConfig {
            scheme: self.scheme,
            c_cfl: self.c_cfl,
            area_tol: self.area_tol,
            min_dt: self.min_dt,
            max_steps: self.max_steps,
            snapshot_every: self.snapshot_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Boundary,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub markers: usize,
    pub raster: usize,
    pub sigma_cells: f64,
    pub route: Route,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { markers: d::MARKERS, raster: d::RASTER, sigma_cells: d::SIGMA_CELLS, route: Route::Boundary }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The unperturbed shape (the initial curve for other geometries).
    Base,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSpec {
    /// `C¹` bound on the height function; absent disables the check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    /// Stop once the dissipation reaches `2·delta0`; absent disables it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    pub reference: Reference,
    /// Translate the reference onto the final curve before measuring `ψ`.
    pub recenter: bool,
    pub fit_window: [f64; 2],
    pub stationary_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sobolev_s: Option<f64>,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        Self {
            eps0: None,
            delta0: None,
            reference: Reference::Base,
            recenter: d::RECENTER,
            fit_window: d::FIT_WINDOW,
            stationary_tol: d::STATIONARY_TOL,
            sobolev_s: None,
        }
    }
}

impl MonitorSpec {
    pub fn sobolev_s(&self, kind: FlowKind) -> f64 {
        self.sobolev_s.unwrap_or(match kind {
            FlowKind::Sd => d::SOBOLEV_S_SD,
            FlowKind::Ms => d::SOBOLEV_S_MS,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub plots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from(d::OUTPUT_DIR), plots: d::PLOTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySpec {
    pub gammas: Vec<f64>,
    pub n_modes: usize,
    pub threshold_sweep: bool,
    pub k_max: usize,
    pub sweep_h: f64,
    pub sweep_markers: usize,
    pub probes: usize,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            gammas: d::GAMMAS.to_vec(),
            n_modes: d::N_MODES,
            threshold_sweep: d::THRESHOLD_SWEEP,
            k_max: d::K_MAX,
            sweep_h: d::SWEEP_H,
            sweep_markers: d::SWEEP_MARKERS,
            probes: d::PROBES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub steps: usize,
    /// Virtual step of the second identities; absent uses the adaptive step / 10.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<f64>,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { steps: d::VERIFY_STEPS, delta_t: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub monitor: MonitorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub stability: StabilitySpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

fn default_seed() -> u64 {
    d::SEED
}

/// A validated scenario together with where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub source: Option<PathBuf>,
    /// Directory that relative paths inside the scenario resolve against.
    pub base_dir: PathBuf,
    pub hash: String,
}

impl Loaded {
    pub fn short_hash(&self) -> &str {
        &self.hash[..16]
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.scenario.output.dir).join(self.short_hash())
    }
}

/// One `section.key = value` assignment from the command line or environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: toml::Value,
    pub origin: String,
}

impl Override {
    /// `section.key=value`; the value is read as TOML, falling back to a string.
    pub fn parse(spec: &str, origin: &str) -> CliResult<Self> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{spec}` is not of the form section.key=value")))?;
        let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(CliError::Usage(format!("override `{spec}` has an empty key")));
        }
        Ok(Self { path, value: parse_value(raw.trim()), origin: origin.to_string() })
    }

    pub fn key(&self) -> String {
        self.path.join(".")
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Overrides from `TORUSFLOW_<SECTION>_<KEY>` variables (and `TORUSFLOW_SEED`).
pub fn env_overrides<I: IntoIterator<Item = (String, String)>>(vars: I) -> CliResult<Vec<Override>> {
    let mut out = Vec::new();
    for (name, value) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let rest = rest.to_ascii_lowercase();
        let path = if rest == "seed" {
            vec![rest]
        } else {
            let section = SECTIONS
                .iter()
                .find(|s| rest.strip_prefix(*s).is_some_and(|k| k.starts_with('_') && k.len() > 1))
                .ok_or_else(|| CliError::config(name.clone(), "environment override names no known section"))?;
            vec![section.to_string(), rest[section.len() + 1..].to_string()]
        };
        out.push(Override { path, value: parse_value(value.trim()), origin: format!("environment {name}") });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn apply(table: &mut toml::Table, ov: &Override) -> CliResult<()> {
    let (last, parents) = ov.path.split_last().expect("override paths are non-empty");
    let mut t = table;
    for p in parents {
        let entry = t.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(ov.key(), format!("{} sets a key inside non-table `{p}`", ov.origin)))?;
    }
    t.insert(last.clone(), ov.value.clone());
    Ok(())
}

/// 1-based line of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line where `path` is assigned in `src`, following `[table]` headers.
pub fn locate(src: &str, path: &[String]) -> Option<usize> {
    let (key, parents) = path.split_last()?;
    let want = parents.join(".");
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(h) = t.strip_prefix('[').and_then(|s| s.split(']').next()) {
            current = h.trim().to_string();
            continue;
        }
        if let Some((k, _)) = t.split_once('=') {
            let k = k.trim();
            // a dotted key inside a table header, or a full dotted key at top level
            let full = if current.is_empty() { k.to_string() } else { format!("{current}.{k}") };
            if (current == want && k == key) || full == path.join(".") {
                return Some(i + 1);
            }
        }
    }
    None
}

fn toml_error(e: &toml::de::Error, src: &str, file: &Option<PathBuf>) -> CliError {
    CliError::Config {
        file: file.clone(),
        line: e.span().map(|s| line_of(src, s.start)),
        key: None,
        message: e.message().trim().to_string(),
    }
}

/// Parse, merge overrides, validate and hash a scenario held in `src`.
pub fn load_str(src: &str, file: Option<&Path>, overrides: &[Override]) -> CliResult<Loaded> {
    let fpath = file.map(Path::to_path_buf);
    // the file alone first, so type errors point at its lines
    let mut table: toml::Table = toml::from_str(src).map_err(|e| toml_error(&e, src, &fpath))?;
    // (keys missing from the file may still come from overrides)
    if let Err(e) = toml::from_str::<Scenario>(src) {
        if e.span().is_some() && !e.message().contains("missing field") {
            return Err(toml_error(&e, src, &fpath));
        }
    }
    for ov in overrides {
        apply(&mut table, ov)?;
    }
    let scenario: Scenario = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config {
        file: None,
        line: None,
        key: None,
        message: format!("after overrides ({}): {}", origins(overrides), e.message().trim()),
    })?;
    let base_dir = fpath
        .as_ref()
        .and_then(|f| f.parent())
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut loaded = Loaded { scenario, source: fpath.clone(), base_dir, hash: String::new() };
    if let Err(e) = validate(&loaded) {
        return Err(anchor(e, src, &fpath, overrides));
    }
    loaded.hash = config_hash(&loaded)?;
    Ok(loaded)
}

pub fn load_file(path: &Path, overrides: &[Override]) -> CliResult<Loaded> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    load_str(&src, Some(path), overrides)
}

fn origins(overrides: &[Override]) -> String {
    overrides.iter().map(|o| format!("{} from {}", o.key(), o.origin)).collect::<Vec<_>>().join(", ")
}

/// Attach a file line (or the override origin) to a validation error.
fn anchor(e: CliError, src: &str, file: &Option<PathBuf>, overrides: &[Override]) -> CliError {
    let CliError::Config { key: Some(key), message, .. } = e else { return e };
    let path: Vec<String> = key.split('.').map(str::to_string).collect();
    if let Some(ov) = overrides.iter().rev().find(|o| o.path == path) {
        return CliError::Config { file: None, line: None, key: Some(key), message: format!("{message} (set by {})", ov.origin) };
    }
    CliError::Config { file: file.clone(), line: locate(src, &path), key: Some(key), message }
}

/// SHA-256 of the canonical JSON of the resolved scenario. The output
/// directory is left out (it does not change any result); a snapshot
/// geometry contributes the bytes of its file.
pub fn config_hash(loaded: &Loaded) -> CliResult<String> {
    let mut s = loaded.scenario.clone();
    s.output.dir = PathBuf::new();
    let mut h = Sha256::new();
    h.update(concat!("torusflow ", env!("CARGO_PKG_VERSION"), "\n").as_bytes());
    h.update(serde_json::to_vec(&s).map_err(|e| CliError::Invariant(e.to_string()))?);
    let mut pending = vec![&loaded.scenario.geometry];
    while let Some(g) = pending.pop() {
        if let Some(p) = &g.path {
            let p = loaded.resolve(p);
            h.update(std::fs::read(&p).map_err(|e| CliError::io(p, e))?);
        }
        if let Some(b) = &g.base {
            pending.push(b);
        }
    }
    Ok(hex::encode(h.finalize()))
}

/// The resolved scenario as TOML, every default spelled out. Like the hash
/// it leaves the output directory at its default.
pub fn resolved_toml(loaded: &Loaded) -> CliResult<String> {
    let mut s = loaded.scenario.clone();
    s.output.dir = PathBuf::from(d::OUTPUT_DIR);
    let body = toml::to_string(&s).map_err(|e| CliError::Invariant(e.to_string()))?;
    Ok(format!("# config_hash = {}\n{body}", loaded.hash))
}

fn check(ok: bool, key: &str, message: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(key, message()))
    }
}

fn finite_pos(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn validate_geometry(g: &GeometrySpec, prefix: &str, loaded: &Loaded) -> CliResult<()> {
    let key = |k: &str| format!("{prefix}.{k}");
    let need = |v: Option<f64>, k: &str| v.ok_or_else(|| CliError::config(key(k), format!("required for shape {:?}", g.shape)));
    let allowed: &[&str] = match g.shape {
        Shape::Circle => &["r", "center", "phase_inside"],
        Shape::Ellipse => &["a", "b", "center", "phase_inside"],
        Shape::Strip => &["h", "offset", "angle"],
        Shape::Lamella => &["k", "h", "offset"],
        Shape::Perturbed => &["base", "mode", "amplitude", "amplitudes"],
        Shape::Snapshot => &["path"],
    };
    let present = [
        ("r", g.r.is_some()),
        ("center", g.center.is_some()),
        ("a", g.a.is_some()),
        ("b", g.b.is_some()),
        ("phase_inside", g.phase_inside.is_some()),
        ("h", g.h.is_some()),
        ("offset", g.offset.is_some()),
        ("angle", g.angle.is_some()),
        ("k", g.k.is_some()),
        ("mode", g.mode.is_some()),
        ("amplitude", g.amplitude.is_some()),
        ("amplitudes", g.amplitudes.is_some()),
        ("base", g.base.is_some()),
        ("path", g.path.is_some()),
    ];
    for (k, is) in present {
        check(!is || allowed.contains(&k), &key(k), || format!("not a parameter of shape {:?}", g.shape))?;
    }
    if let Some(c) = g.center {
        check(c.iter().all(|x| x.is_finite()), &key("center"), || "must be finite".into())?;
    }
    match g.shape {
        Shape::Circle => {
            let r = need(g.r, "r")?;
            check(r > 0.0 && r < 0.5, &key("r"), || format!("radius {r} outside (0, 0.5)"))?;
        }
        Shape::Ellipse => {
            for (k, v) in [("a", need(g.a, "a")?), ("b", need(g.b, "b")?)] {
                check(v > 0.0 && v < 0.5, &key(k), || format!("semi-axis {v} outside (0, 0.5)"))?;
            }
        }
        Shape::Strip | Shape::Lamella => {
            let h = need(g.h, "h")?;
            check(h > 0.0 && h < 1.0, &key("h"), || format!("phase fraction {h} outside (0, 1)"))?;
            if let Some(o) = g.offset {
                check(o.is_finite(), &key("offset"), || "must be finite".into())?;
            }
            if let Some(a) = g.angle {
                check(torusflow::geometry::shapes::StripAngle::from_degrees(a).is_ok(), &key("angle"), || {
                    format!("angle {a} is not 0, 45 or 90 degrees")
                })?;
            }
            if g.shape == Shape::Lamella {
                let k = g.k.ok_or_else(|| CliError::config(key("k"), "required for shape Lamella"))?;
                check((1..=16).contains(&k), &key("k"), || format!("strip count {k} outside 1..=16"))?;
            }
        }
        Shape::Perturbed => {
            let base = g.base.as_ref().ok_or_else(|| CliError::config(key("base"), "perturbed geometry needs a [base] table"))?;
            check(base.shape != Shape::Perturbed, &key("base.shape"), || "the base cannot itself be perturbed".into())?;
            let mode = g.mode.ok_or_else(|| CliError::config(key("mode"), "required for shape Perturbed"))?;
            check(mode >= 1, &key("mode"), || "mode must be at least 1".into())?;
            check(g.amplitude.is_some() || g.amplitudes.is_some(), &key("amplitude"), || "required for shape Perturbed".into())?;
            if let Some(a) = g.amplitude {
                check(a.is_finite() && a.abs() < 0.25, &key("amplitude"), || format!("amplitude {a} outside (−0.25, 0.25)"))?;
            }
            if let Some(v) = &g.amplitudes {
                check(v.iter().all(|a| a.is_finite() && a.abs() < 0.25), &key("amplitudes"), || {
                    "amplitudes must lie in (−0.25, 0.25)".into()
                })?;
            }
            validate_geometry(base, &key("base"), loaded)?;
        }
        Shape::Snapshot => {
            let p = g.path.as_ref().ok_or_else(|| CliError::config(key("path"), "required for shape Snapshot"))?;
            let full = loaded.resolve(p);
            check(full.is_file(), &key("path"), || format!("snapshot file {} does not exist", full.display()))?;
        }
    }
    Ok(())
}

/// Range checks on every numeric key; all run before any computation.
pub fn validate(loaded: &Loaded) -> CliResult<()> {
    let s = &loaded.scenario;
    validate_geometry(&s.geometry, "geometry", loaded)?;
    let f = &s.flow;
    check(f.gamma.is_finite() && f.gamma >= 0.0, "flow.gamma", || format!("γ = {} must be finite and ≥ 0", f.gamma))?;
    check(f.kind == FlowKind::Ms || f.gamma == 0.0, "flow.gamma", || "surface diffusion has no nonlocal term; set γ = 0".into())?;
    check(finite_pos(f.t_end), "flow.t_end", || format!("t_end = {} must be positive", f.t_end))?;
    check(f.max_steps > 0, "flow.max_steps", || "must be positive".into())?;
    check(finite_pos(f.area_tol), "flow.area_tol", || "must be positive".into())?;
    check(finite_pos(f.min_dt), "flow.min_dt", || "must be positive".into())?;
    if let Some(c) = f.c_cfl {
        check(finite_pos(c), "flow.c_cfl", || format!("c_cfl = {c} must be positive"))?;
    }
    let g = &s.grid;
    check(g.markers >= torusflow::geometry::MIN_MARKERS, "grid.markers", || {
        format!("{} markers per loop; at least {} needed", g.markers, torusflow::geometry::MIN_MARKERS)
    })?;
    check(g.raster >= 32 && g.raster % 2 == 0, "grid.raster", || format!("raster {} must be even and ≥ 32", g.raster))?;
    check(finite_pos(g.sigma_cells), "grid.sigma_cells", || "must be positive".into())?;
    let m = &s.monitor;
    for (k, v) in [("monitor.eps0", m.eps0), ("monitor.delta0", m.delta0)] {
        if let Some(v) = v {
            check(finite_pos(v), k, || format!("{v} must be positive"))?;
        }
    }
    let [w0, w1] = m.fit_window;
    check((0.0..1.0).contains(&w0) && w1 > w0 && w1 <= 1.0, "monitor.fit_window", || {
        format!("window [{w0}, {w1}] must satisfy 0 ≤ a < b ≤ 1")
    })?;
    check(m.stationary_tol.is_finite() && m.stationary_tol >= 0.0, "monitor.stationary_tol", || "must be ≥ 0".into())?;
    if let Some(sv) = m.sobolev_s {
        check(sv.is_finite() && sv >= 0.0, "monitor.sobolev_s", || "must be ≥ 0".into())?;
    }
    let st = &s.stability;
    check(!st.gammas.is_empty(), "stability.gammas", || "list is empty".into())?;
    check(st.gammas.iter().all(|g| g.is_finite() && *g >= 0.0), "stability.gammas", || "entries must be finite and ≥ 0".into())?;
    check((1..=64).contains(&st.n_modes), "stability.n_modes", || format!("{} outside 1..=64", st.n_modes))?;
    check((1..=16).contains(&st.k_max), "stability.k_max", || format!("{} outside 1..=16", st.k_max))?;
    check(st.sweep_h > 0.0 && st.sweep_h < 1.0, "stability.sweep_h", || "must lie in (0, 1)".into())?;
    check(st.sweep_markers >= torusflow::geometry::MIN_MARKERS, "stability.sweep_markers", || "too few markers".into())?;
    check(s.verify.steps >= 3, "verify.steps", || "need at least 3 steps for a centred difference".into())?;
    if let Some(dt) = s.verify.delta_t {
        check(finite_pos(dt), "verify.delta_t", || "must be positive".into())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CIRCLE: &str = "seed = 3\n[geometry]\nshape = \"circle\"\nr = 0.2\n\n[flow]\nkind = \"ms\"\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let l = load_str(CIRCLE, None, &[]).unwrap();
        assert_eq!(l.scenario.seed, 3);
        assert_eq!(l.scenario.grid, GridSpec::default());
        assert_eq!(l.hash.len(), 64);
    }

    #[test]
    fn overrides_take_precedence_and_change_the_hash() {
        let base = load_str(CIRCLE, None, &[]).unwrap();
        let ov = Override::parse("flow.gamma=2.5", "flag").unwrap();
        let l = load_str(CIRCLE, None, &[ov]).unwrap();
        assert_eq!(l.scenario.flow.gamma, 2.5);
        assert_ne!(l.hash, base.hash);
        let env = env_overrides([("TORUSFLOW_FLOW_T_END".to_string(), "2e-3".to_string())]).unwrap();
        assert_eq!(env[0].path, vec!["flow", "t_end"]);
        assert_eq!(load_str(CIRCLE, None, &env).unwrap().scenario.flow.t_end, 2e-3);
        assert!(env_overrides([("TORUSFLOW_NOPE_X".to_string(), "1".to_string())]).is_err());
    }

    #[test]
    fn output_dir_does_not_enter_the_hash() {
        let a = load_str(CIRCLE, None, &[]).unwrap();
        let b = load_str(CIRCLE, None, &[Override::parse("output.dir=elsewhere", "flag").unwrap()]).unwrap();
        assert_eq!(a.hash, b.hash);
    }

    #[test]
    fn errors_are_line_anchored() {
        let bad = "[geometry]\nshape = \"circle\"\nr = 0.7\n";
        match load_str(bad, None, &[]).unwrap_err() {
            CliError::Config { line, key, .. } => {
                assert_eq!(line, Some(3));
                assert_eq!(key.as_deref(), Some("geometry.r"));
            }
            e => panic!("{e}"),
        }
        let typo = "[geometry]\nshape = \"circle\"\nr = 0.2\n[flow]\nkindd = \"ms\"\n";
        assert!(matches!(load_str(typo, None, &[]).unwrap_err(), CliError::Config { line: Some(5), .. }));
        let syntax = "[geometry]\nshape = \"circle\"\nr = = 0.2\n";
        assert!(matches!(load_str(syntax, None, &[]).unwrap_err(), CliError::Config { line: Some(3), .. }));
        let stray = "[geometry]\nshape = \"circle\"\nr = 0.2\nh = 0.5\n";
        assert!(matches!(load_str(stray, None, &[]).unwrap_err(), CliError::Config { line: Some(4), .. }));
    }

    #[test]
    fn locate_follows_nested_tables() {
        let src = "[geometry]\nshape = \"perturbed\"\n[geometry.base]\nshape = \"circle\"\nr = 0.2\n";
        let p: Vec<String> = ["geometry", "base", "r"].iter().map(|s| s.to_string()).collect();
        assert_eq!(locate(src, &p), Some(5));
    }

    #[test]
    fn override_values_are_typed() {
        assert_eq!(Override::parse("a.b=3", "t").unwrap().value, toml::Value::Integer(3));
        assert_eq!(Override::parse("a.b=[1.0, 2.0]", "t").unwrap().value.as_array().unwrap().len(), 2);
        assert_eq!(Override::parse("a.b=ms", "t").unwrap().value, toml::Value::String("ms".into()));
        assert!(Override::parse("a.b", "t").is_err());
    }
}
