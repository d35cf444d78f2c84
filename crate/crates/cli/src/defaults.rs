//! Every default the scenario loader fills in, in one place. A key left out
//! of a scenario file takes the value listed here; the resolved scenario
//! written next to each output spells all of them out.

use torusflow::flow::Scheme;

/// Seed of the randomized probe vectors in `stability`.
pub const SEED: u64 = 0;

// [geometry]
pub const CENTER: [f64; 2] = [0.5, 0.5];
pub const STRIP_OFFSET: f64 = 0.25;
/// Degrees; one of 0, 45, 90.
pub const STRIP_ANGLE: f64 = 0.0;
pub const LAMELLA_H: f64 = 0.5;
pub const PHASE_INSIDE: bool = true;

// [flow]
pub const GAMMA: f64 = 0.0;
/// Semi-implicit scheme; explicit RK4 needs far more steps on stiff runs.
pub const SCHEME: Scheme = Scheme::Ssd;
pub const T_END: f64 = 1e-3;
pub const MAX_STEPS: usize = 1_000_000;
pub const AREA_TOL: f64 = 1e-7;
pub const MIN_DT: f64 = 1e-14;
/// Steps between stored snapshots; 0 keeps the initial and final curves only.
pub const SNAPSHOT_EVERY: usize = 0;

// [grid]
/// Markers per loop.
pub const MARKERS: usize = 64;
/// Raster size of the grid-based diagnostics (asymmetry distance, grid route).
pub const RASTER: usize = 256;
/// Mollifier width of the grid route, in cells.
pub const SIGMA_CELLS: f64 = 1.0;

// [monitor]
/// Window of the exponential fit, as fractions of the final time.
pub const FIT_WINDOW: [f64; 2] = [0.3, 0.9];
/// A run whose energy changes by at most this fraction is reported as
/// stationary (decay rate 0) instead of fitting round-off noise.
pub const STATIONARY_TOL: f64 = 1e-12;
pub const RECENTER: bool = true;
/// Sobolev exponents of the final `ψ` norm.
pub const SOBOLEV_S_SD: f64 = 3.0;
pub const SOBOLEV_S_MS: f64 = 2.5;

// [output]
pub const OUTPUT_DIR: &str = "torusflow-out";
pub const PLOTS: bool = true;

// [stability]
pub const GAMMAS: [f64; 1] = [0.0];
pub const N_MODES: usize = 8;
pub const THRESHOLD_SWEEP: bool = false;
pub const K_MAX: usize = 6;
pub const SWEEP_H: f64 = 0.5;
pub const SWEEP_MARKERS: usize = 32;
pub const PROBES: usize = 8;

// [verify]
pub const VERIFY_STEPS: usize = 40;
/// The virtual step of the second identities is the adaptive step over this.
pub const VERIFY_DT_DIVISOR: f64 = 10.0;
