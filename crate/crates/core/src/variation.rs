//! Criticality, the second variation of the Ohta–Kawasaki energy on normal
//! perturbations, and stability classification modulo translations.
//!
//! For a normal perturbation `φ` of `∂F`,
//! `∂²J[φ] = ∫|D_sφ|² − ∫κ²φ² + 8γ∬G φφ + 4γ∫∂_ν v_F φ²`.
//! The form is assembled on per-loop Fourier modes, restricted to the
//! zero-total-mean subspace, and diagonalised against the `L²` Gram matrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{lambda, line_measure_spectrum};
use crate::geometry::shapes::lamella_k;
use crate::geometry::{dot, perimeter, CurveSamples, MarkerLoop, PeriodicCurve, SampleKind};
use crate::green::PeriodicGreen;
use crate::layer::{assemble_layers, assemble_with_potential};
use crate::par;

/// `H + 4γv_E − λ` with `λ` its arclength mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Criticality {
    pub residual: CurveSamples,
    pub lambda: f64,
    pub linf: f64,
    pub l2: f64,
}

pub fn criticality_residual(curve: &PeriodicCurve, gamma: f64, green: &PeriodicGreen) -> Criticality {
    let mut g = curve.kappa();
    if gamma > 0.0 {
        let (_, pot) = assemble_with_potential(curve, green);
        for (g, v) in g.iter_mut().zip(&pot.trace.boundary_values.values) {
            *g += 4.0 * gamma * v;
        }
    }
    let lambda = curve.integrate(&g) / perimeter(curve);
    let r: Vec<f64> = g.iter().map(|x| x - lambda).collect();
    let linf = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l2 = curve.integrate(&r.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
    Criticality { residual: CurveSamples::new(SampleKind::Generic, r), lambda, linf, l2 }
}

/// `L²`-orthonormal normal traces `ẽ_i·ν` of the translations that do not
/// vanish identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationBasis {
    pub functions: Vec<Vec<f64>>,
    pub directions: Vec<[f64; 2]>,
    /// Indices (into the Gram eigenbasis, ascending) of the retained directions.
    pub indices: Vec<usize>,
    /// `‖ẽ_i·ν‖²` for both directions.
    pub norms2: [f64; 2],
    pub gram_condition: f64,
}

pub fn translation_basis(curve: &PeriodicCurve) -> TranslationBasis {
    let nu = curve.normals();
    let comp = |c: usize| nu.iter().map(|n| n[c]).collect::<Vec<_>>();
    let (nx, ny) = (comp(0), comp(1));
    let ip = |a: &[f64], b: &[f64]| curve.integrate(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>());
    let g = nalgebra::Matrix2::new(ip(&nx, &nx), ip(&nx, &ny), ip(&ny, &nx), ip(&ny, &ny));
    let eig = g.symmetric_eigen();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let p = perimeter(curve);
    let mut functions = Vec::new();
    let mut directions = Vec::new();
    let mut indices = Vec::new();
    let mut norms2 = [0.0; 2];
    for (slot, &i) in order.iter().enumerate() {
        let lam = eig.eigenvalues[i].max(0.0);
        norms2[slot] = lam;
        let e = [eig.eigenvectors[(0, i)], eig.eigenvectors[(1, i)]];
        // eigenvalue roundoff is O(ε·p); anything near it is a null direction
        if lam <= 1e-10 * p {
            continue;
        }
        functions.push(nu.iter().map(|n| dot(e, *n) / lam.sqrt()).collect());
        directions.push(e);
        indices.push(slot);
    }
    let gram_condition = if norms2[0] > 0.0 { norms2[1] / norms2[0] } else { f64::INFINITY };
    TranslationBasis { functions, directions, indices, norms2, gram_condition }
}

/// `L²` distance of `φ` from the translation span, relative to `‖φ‖`.
pub fn min_translation_distance(phi: &[f64], curve: &PeriodicCurve) -> Result<f64> {
    let ip = |a: &[f64], b: &[f64]| curve.integrate(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>());
    let n2 = ip(phi, phi);
    if n2 <= 0.0 {
        return Err(Error::InvalidInput("φ vanishes".into()));
    }
    let tb = translation_basis(curve);
    let proj: f64 = tb.functions.iter().map(|b| ip(phi, b).powi(2)).sum();
    Ok(((n2 - proj).max(0.0) / n2).sqrt())
}

/// How the `∬Gφφ` block is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlocalRoute {
    /// Kress-corrected Nyström quadrature of the periodic Green kernel.
    Boundary,
    /// Fourier energy of the line measures on an `n×n` grid, Gaussian-smoothed.
    Grid { n: usize, sigma_cells: f64 },
}

/// The four parts of `∂²J` on the mode basis, each already carrying its
/// `γ`-dependent factor, plus the `L²` Gram matrix.
#[derive(Debug, Clone)]
pub struct SecondVariationMatrix {
    pub n_modes: usize,
    pub gamma: f64,
    /// Samples of the basis functions at the markers (column per function).
    pub basis: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub local_part: DMatrix<f64>,
    pub curvature_part: DMatrix<f64>,
    pub nonlocal_kernel_part: DMatrix<f64>,
    pub potential_part: DMatrix<f64>,
    pub criticality: Criticality,
    pub warnings: Vec<String>,
}

impl SecondVariationMatrix {
    pub fn total(&self) -> DMatrix<f64> {
        &self.local_part + &self.curvature_part + &self.nonlocal_kernel_part + &self.potential_part
    }

    pub fn quadratic_form(&self, coeffs: &[f64]) -> f64 {
        let c = DVector::from_column_slice(coeffs);
        (c.transpose() * self.total() * &c)[(0, 0)]
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }
}

/// Residual level above which a curve is treated as non-critical.
pub fn criticality_tolerance(curve: &PeriodicCurve) -> f64 {
    1e-6 * (2.0 * PI / max_loop_length(curve)).max(1.0)
}

fn max_loop_length(curve: &PeriodicCurve) -> f64 {
    curve.frames().iter().map(|f| f.length).fold(0.0, f64::max)
}

/// Per-loop modes `1, cos mα, sin mα` (`m ≤ n_modes`) and their arclength derivatives.
fn mode_basis(curve: &PeriodicCurve, n_modes: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = curve.n_markers();
    let per = 2 * n_modes + 1;
    let nl = curve.loops().len();
    let mut b = DMatrix::zeros(n, nl * per);
    let mut db = DMatrix::zeros(n, nl * per);
    let offsets = curve.offsets();
    for (l, f) in curve.frames().iter().enumerate() {
        let nm = f.len();
        if 2 * n_modes >= nm {
            return Err(Error::Resolution(format!("{n_modes} modes need more than {nm} markers per loop")));
        }
        for j in 0..nm {
            let row = offsets[l] + j;
            let a = 2.0 * PI * j as f64 / nm as f64;
            let col0 = l * per;
            b[(row, col0)] = 1.0;
            for m in 1..=n_modes {
                let (s, c) = (m as f64 * a).sin_cos();
                let mf = m as f64 / f.speed[j];
                b[(row, col0 + 2 * m - 1)] = c;
                b[(row, col0 + 2 * m)] = s;
                db[(row, col0 + 2 * m - 1)] = -mf * s;
                db[(row, col0 + 2 * m)] = mf * c;
            }
        }
    }
    Ok((b, db))
}

fn weighted_gram(a: &DMatrix<f64>, w: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut wa = a.clone();
    for (i, wi) in w.iter().enumerate() {
        wa.row_mut(i).scale_mut(*wi);
    }
    let m = wa.transpose() * b;
    symmetrize(m)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

pub fn assemble_second_variation(
    curve: &PeriodicCurve,
    gamma: f64,
    n_modes: usize,
    route: NonlocalRoute,
    green: &PeriodicGreen,
) -> Result<SecondVariationMatrix> {
    if gamma < 0.0 {
        return Err(Error::InvalidInput(format!("γ = {gamma} must be non-negative")));
    }
    let (basis, dbasis) = mode_basis(curve, n_modes)?;
    let w = curve.weights();
    let kappa = curve.kappa();
    let gram = weighted_gram(&basis, &w, &basis);
    let local_part = weighted_gram(&dbasis, &w, &dbasis);
    let k2w: Vec<f64> = w.iter().zip(&kappa).map(|(w, k)| -w * k * k).collect();
    let curvature_part = weighted_gram(&basis, &k2w, &basis);
    let m = basis.ncols();
    let criticality = criticality_residual(curve, gamma, green);
    let (nonlocal_kernel_part, potential_part) = if gamma > 0.0 {
        let (ops, pot) = assemble_with_potential(curve, green);
        let dn = &pot.trace.normal_derivative.values;
        let pw: Vec<f64> = w.iter().zip(dn).map(|(w, d)| 4.0 * gamma * w * d).collect();
        let potential = weighted_gram(&basis, &pw, &basis);
        let nonlocal = match route {
            NonlocalRoute::Boundary => {
                let mut wb = basis.clone();
                for (i, wi) in w.iter().enumerate() {
                    wb.row_mut(i).scale_mut(*wi);
                }
                symmetrize(wb.transpose() * &ops.kernel * &wb) * (8.0 * gamma)
            }
            NonlocalRoute::Grid { n, sigma_cells } => grid_nonlocal(curve, n_modes, n, sigma_cells)? * (8.0 * gamma),
        };
        (nonlocal, potential)
    } else {
        (DMatrix::zeros(m, m), DMatrix::zeros(m, m))
    };
    let mut warnings = Vec::new();
    if criticality.linf > criticality_tolerance(curve) {
        warnings.push(format!(
            "curve is not critical (‖H + 4γv − λ‖∞ = {:.3e}); the form omits the non-critical remainder",
            criticality.linf
        ));
    }
    Ok(SecondVariationMatrix {
        n_modes,
        gamma,
        basis,
        gram,
        local_part,
        curvature_part,
        nonlocal_kernel_part,
        potential_part,
        criticality,
        warnings,
    })
}

/// `∬Gφ_iφ_j` through the Fourier energies of the line measures. The modes
/// are resampled on a spectrally refined copy of the curve so the point
/// measure does not alias, and the `O(1/n)` truncation is cancelled by
/// Richardson extrapolation over `n/2` and `n`.
fn grid_nonlocal(curve: &PeriodicCurve, n_modes: usize, n: usize, sigma_cells: f64) -> Result<DMatrix<f64>> {
    if n < 32 || n % 2 != 0 {
        return Err(Error::Resolution(format!("grid route needs an even n ≥ 32, got {n}")));
    }
    let fine = refined(curve, n)?;
    let (basis, _) = mode_basis(&fine, n_modes)?;
    let coarse = grid_gram(&fine, &basis, n / 2, sigma_cells)?;
    let full = grid_gram(&fine, &basis, n, sigma_cells)?;
    Ok(full * 2.0 - coarse)
}

/// Same loops, with at least `n·L` equispaced-in-parameter markers per loop.
fn refined(curve: &PeriodicCurve, n: usize) -> Result<PeriodicCurve> {
    let loops = curve
        .loops()
        .iter()
        .zip(curve.frames())
        .map(|(l, f)| {
            let nm = l.len();
            let factor = ((2.0 * n as f64 * f.length) / nm as f64).ceil().max(1.0) as usize;
            let m = nm * factor;
            let ip = l.interpolant();
            let pts = (0..m).map(|j| ip.point(2.0 * PI * j as f64 / m as f64)).collect();
            MarkerLoop::new(pts, l.winding(), l.orientation())
        })
        .collect::<Result<Vec<_>>>()?;
    PeriodicCurve::new(loops)
}

fn grid_gram(curve: &PeriodicCurve, basis: &DMatrix<f64>, n: usize, sigma_cells: f64) -> Result<DMatrix<f64>> {
    let m = basis.ncols();
    let cols: Vec<Vec<f64>> = (0..m).map(|j| basis.column(j).iter().copied().collect()).collect();
    let spectra: Vec<Vec<nalgebra::Complex<f64>>> = cols
        .iter()
        .map(|c| line_measure_spectrum(curve, c, n, sigma_cells).map(|s| s.0))
        .collect::<Result<_>>()?;
    let inv: Vec<f64> = (0..n * n)
        .map(|k| {
            let l = lambda(n, k / n, k % n);
            if l > 0.0 {
                1.0 / l
            } else {
                0.0
            }
        })
        .collect();
    let entries = par::map_indexed(m * m, |k| {
        let (i, j) = (k / m, k % m);
        if j < i {
            return 0.0;
        }
        spectra[i].iter().zip(&spectra[j]).zip(&inv).map(|((a, b), l)| (a * b.conj()).re * l).sum::<f64>()
    });
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            out[(i, j)] = entries[i * m + j];
            out[(j, i)] = entries[i * m + j];
        }
    }
    Ok(out)
}

/// Terms of `∂²J[φ]` evaluated directly from marker samples of `φ`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FormTerms {
    pub local: f64,
    pub curvature: f64,
    pub nonlocal: f64,
    pub potential: f64,
}

impl FormTerms {
    pub fn total(&self) -> f64 {
        self.local + self.curvature + self.nonlocal + self.potential
    }
}

pub fn second_variation_form(curve: &PeriodicCurve, gamma: f64, phi: &[f64], green: &PeriodicGreen) -> FormTerms {
    let ds = curve.map_loops(phi, |f, p| f.d_s(p));
    let kappa = curve.kappa();
    let local = curve.integrate(&ds.iter().map(|d| d * d).collect::<Vec<_>>());
    let curvature = -curve.integrate(&phi.iter().zip(&kappa).map(|(p, k)| k * k * p * p).collect::<Vec<_>>());
    let (mut nonlocal, mut potential) = (0.0, 0.0);
    if gamma > 0.0 {
        let (ops, pot) = assemble_with_potential(curve, green);
        let mu: Vec<f64> = phi.iter().zip(&ops.weights).map(|(p, w)| p * w).collect();
        let kmu = &ops.kernel * DVector::from_column_slice(&mu);
        nonlocal = 8.0 * gamma * mu.iter().zip(kmu.iter()).map(|(a, b)| a * b).sum::<f64>();
        let dn = &pot.trace.normal_derivative.values;
        potential = 4.0 * gamma * curve.integrate(&phi.iter().zip(dn).map(|(p, d)| d * p * p).collect::<Vec<_>>());
    }
    FormTerms { local, curvature, nonlocal, potential }
}

/// `∬Gφφ` alone, with the Kress-corrected kernel.
pub fn green_energy(curve: &PeriodicCurve, phi: &[f64], green: &PeriodicGreen) -> f64 {
    let ops = assemble_layers(curve, green);
    let mu: Vec<f64> = phi.iter().zip(&ops.weights).map(|(p, w)| p * w).collect();
    let kmu = &ops.kernel * DVector::from_column_slice(&mu);
    mu.iter().zip(kmu.iter()).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    StrictlyStable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub gamma: f64,
    pub n_modes: usize,
    /// On the zero-mean subspace, ascending.
    pub eigenvalues: Vec<f64>,
    /// Basis coefficients, one vector per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    pub translation_overlap: Vec<f64>,
    /// Eigenvalue indices identified as translations (overlap > 0.99).
    pub translation_modes: Vec<usize>,
    /// Smallest eigenvalue on the zero-mean complement of the translations.
    pub gap_on_t_perp: f64,
    pub i_f: Vec<usize>,
    pub gram_condition: f64,
    pub classification: Classification,
    pub stab_tol: f64,
    pub criticality_linf: f64,
    pub critical: bool,
    pub warnings: Vec<String>,
}

/// Orthonormal basis of the complement of `span(constraints)` (columns),
/// from the unit eigenspace of the projector `I − QQᵀ`.
fn complement(constraints: &DMatrix<f64>) -> DMatrix<f64> {
    let m = constraints.nrows();
    let q = constraints.clone().qr().q();
    let proj = DMatrix::<f64>::identity(m, m) - &q * q.transpose();
    let eig = SymmetricEigen::new(symmetrize(proj));
    let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    DMatrix::from_columns(&keep.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>())
}

/// Eigenpairs of `A x = λ G x` restricted to the column space of `z`.
fn restricted_eigen(a: &DMatrix<f64>, g: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let ar = symmetrize(z.transpose() * a * z);
    let gr = symmetrize(z.transpose() * g * z);
    let chol = gr.cholesky().ok_or_else(|| Error::Resolution("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::Resolution("singular Gram factor".into()))?;
    let c = symmetrize(&linv * ar * linv.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let back = z * linv.transpose();
    let mut vecs = DMatrix::zeros(z.nrows(), order.len());
    let vals = order
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            vecs.set_column(k, &(&back * eig.eigenvectors.column(i)));
            eig.eigenvalues[i]
        })
        .collect();
    Ok((vals, vecs))
}

pub fn spectrum(matrix: &SecondVariationMatrix, curve: &PeriodicCurve) -> Result<SpectrumReport> {
    let w = curve.weights();
    let m = matrix.dim();
    let a = matrix.total();
    // ∫b_i ds: the zero-total-mean constraint in coefficient space
    let means = DVector::from_iterator(m, (0..m).map(|j| matrix.basis.column(j).iter().zip(&w).map(|(b, w)| b * w).sum()));
    let z0 = complement(&DMatrix::from_columns(&[means.clone()]));
    let (vals, vecs) = restricted_eigen(&a, &matrix.gram, &z0)?;

    let tb = translation_basis(curve);
    // coefficient-space functionals φ ↦ ∫φ b_T ds
    let t_funcs: Vec<DVector<f64>> = tb
        .functions
        .iter()
        .map(|f| {
            let wf: Vec<f64> = f.iter().zip(&w).map(|(a, b)| a * b).collect();
            matrix.basis.transpose() * DVector::from_vec(wf)
        })
        .collect();
    let mut overlaps = Vec::with_capacity(vals.len());
    for k in 0..vals.len() {
        let c = vecs.column(k);
        let n2 = (c.transpose() * &matrix.gram * c)[(0, 0)];
        let p: f64 = t_funcs.iter().map(|t| t.dot(&c).powi(2)).sum();
        overlaps.push((p / n2).clamp(0.0, 1.0));
    }
    let translation_modes: Vec<usize> = (0..vals.len()).filter(|&k| overlaps[k] > 0.99).collect();

    let mut cons = vec![means];
    cons.extend(t_funcs.iter().cloned());
    let zt = complement(&DMatrix::from_columns(&cons));
    let (perp, _) = restricted_eigen(&a, &matrix.gram, &zt)?;
    let gap = perp.first().copied().unwrap_or(f64::INFINITY);

    let scale = (2.0 * PI / max_loop_length(curve)).powi(2);
    let stab_tol = 1e-6 * scale;
    let classification = if gap > stab_tol {
        Classification::StrictlyStable
    } else if gap.abs() <= stab_tol {
        Classification::Marginal
    } else {
        Classification::Unstable
    };
    let critical = matrix.criticality.linf <= criticality_tolerance(curve);
    let mut warnings = matrix.warnings.clone();
    if !critical && vals.first().is_some_and(|v| *v < -stab_tol) {
        warnings.push("negative direction at a non-critical curve; diagnostic only".into());
    }
    Ok(SpectrumReport {
        gamma: matrix.gamma,
        n_modes: matrix.n_modes,
        eigenvectors: (0..vals.len()).map(|k| vecs.column(k).iter().copied().collect()).collect(),
        eigenvalues: vals,
        translation_overlap: overlaps,
        translation_modes,
        gap_on_t_perp: gap,
        i_f: tb.indices,
        gram_condition: tb.gram_condition,
        classification,
        stab_tol,
        criticality_linf: matrix.criticality.linf,
        critical,
        warnings,
    })
}

/// `∫|H − H̄|² / ∫|D_sH|²`; zero for constant `H`, `None` (infinite) when
/// `H` is constant on each loop but not globally.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoincareRatio {
    pub ratio: Option<f64>,
    pub numerator: f64,
    pub denominator: f64,
}

impl PoincareRatio {
    pub fn is_infinite(&self) -> bool {
        self.ratio.is_none()
    }
}

pub fn geometric_poincare_ratio(curve: &PeriodicCurve) -> PoincareRatio {
    let h = curve.kappa();
    let mean = curve.integrate(&h) / perimeter(curve);
    let numerator = curve.integrate(&h.iter().map(|x| (x - mean).powi(2)).collect::<Vec<_>>());
    let dh = curve.map_loops(&h, |f, k| f.d_s(k));
    let denominator = curve.integrate(&dh.iter().map(|x| x * x).collect::<Vec<_>>());
    let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let ratio = if numerator <= 1e-24 * scale * scale {
        Some(0.0)
    } else if denominator <= 1e-12 * numerator {
        None
    } else {
        Some(numerator / denominator)
    };
    PoincareRatio { ratio, numerator, denominator }
}

/// Settings of the lamella sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LamellaSweep {
    /// Total phase fraction.
    pub h: f64,
    pub markers: usize,
    pub n_modes: usize,
}

impl Default for LamellaSweep {
    fn default() -> Self {
        Self { h: 0.5, markers: 32, n_modes: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub k: usize,
    pub gap: f64,
    pub classification: Classification,
    pub criticality_linf: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub gamma: f64,
    pub k: Option<usize>,
    pub entries: Vec<ThresholdEntry>,
}

/// Smallest `k ≤ k_max` whose equispaced `k`-strip lamella is strictly stable.
pub fn lamella_threshold(gamma: f64, k_max: usize, sweep: &LamellaSweep, green: &PeriodicGreen) -> Result<ThresholdResult> {
    if k_max == 0 || k_max > 16 {
        return Err(Error::InvalidInput(format!("k_max = {k_max} outside 1..=16")));
    }
    let mut entries = Vec::new();
    let mut found = None;
    for k in 1..=k_max {
        let curve = lamella_k(k, sweep.h, 0.25 * (1.0 - sweep.h) / k as f64, sweep.markers)?;
        let mat = assemble_second_variation(&curve, gamma, sweep.n_modes, NonlocalRoute::Boundary, green)?;
        let rep = spectrum(&mat, &curve)?;
        entries.push(ThresholdEntry {
            k,
            gap: rep.gap_on_t_perp,
            classification: rep.classification,
            criticality_linf: rep.criticality_linf,
        });
        if rep.classification == Classification::StrictlyStable {
            found = Some(k);
            break;
        }
    }
    Ok(ThresholdResult { gamma, k: found, entries })
}

#[cfg(test)]
mod tests;
