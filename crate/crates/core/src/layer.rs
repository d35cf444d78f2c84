//! Nyström discretisation of the periodic single-layer and adjoint
//! double-layer operators on the markers of a curve, and the boundary-integral
//! route to the phase potential `v_E`.
//!
//! Within a loop the logarithmic singularity of `G` is split off as
//! `−(1/4π) ln(4 sin²((t−s)/2))` and integrated with Kress weights; the
//! remainder, and all loop-to-loop interactions, use the trapezoid rule.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::field::PotentialTrace;
use crate::geometry::{dot, CurveSamples, PeriodicCurve, SampleKind};
use crate::green::PeriodicGreen;
use crate::par;

/// `ζ′(−2) = −ζ(3)/(4π²)`.
const ZETA_PRIME_M2: f64 = -0.030_448_457_058_393_27;

/// Kress weights `R[d]`, `d = (i − j) mod N`, for `∫ ln(4 sin²((t_i−s)/2)) f(s) ds`.
pub fn kress_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    (0..n)
        .map(|d| {
            let t = 2.0 * PI * d as f64 / n as f64;
            let mut s = 0.0;
            for m in 1..half {
                s += (m as f64 * t).cos() / m as f64;
            }
            let mut r = -4.0 * PI / n as f64 * s;
            if n % 2 == 0 {
                r -= 4.0 * PI / (n * n) as f64 * (half as f64 * t).cos();
            }
            r
        })
        .collect()
}

/// Dense layer operators on the concatenated markers of one curve.
#[derive(Debug, Clone)]
pub struct LayerOperators {
    /// Symmetric kernel `K`: the single layer is `S = K·diag(w)`.
    pub kernel: DMatrix<f64>,
    /// Adjoint double layer with weights folded in: `(K*σ)_i = Σ_j A_ij σ_j`.
    pub adjoint: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub normals: Vec<[f64; 2]>,
    pub kappa: Vec<f64>,
}

/// Boundary potential data, available when `G2` was assembled as well.
#[derive(Debug, Clone)]
pub struct BoundaryPotential {
    pub trace: PotentialTrace,
    /// `∫|Dv_E|²`.
    pub nonlocal_energy: f64,
}

impl LayerOperators {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `S σ = K (w ∘ σ)`.
    pub fn single_layer_apply(&self, sigma: &[f64]) -> Vec<f64> {
        let mu: Vec<f64> = sigma.iter().zip(&self.weights).map(|(a, b)| a * b).collect();
        (&self.kernel * nalgebra::DVector::from_vec(mu)).data.into()
    }

    /// The single layer `S = K·diag(w)` as an explicit matrix.
    pub fn single_layer_matrix(&self) -> DMatrix<f64> {
        let mut s = self.kernel.clone();
        for (j, w) in self.weights.iter().enumerate() {
            s.column_mut(j).scale_mut(*w);
        }
        s
    }

    pub fn adjoint_apply(&self, sigma: &[f64]) -> Vec<f64> {
        (&self.adjoint * nalgebra::DVector::from_column_slice(sigma)).data.into()
    }

    /// `∂_ν v_E = −2 ν·S[ν]` with the Kress-corrected kernel.
    pub fn potential_normal_derivative(&self) -> Vec<f64> {
        let n = self.len();
        par::map_indexed(n, |i| {
            let mut s = 0.0;
            for j in 0..n {
                s += self.kernel[(i, j)] * self.weights[j] * dot(self.normals[i], self.normals[j]);
            }
            -2.0 * s
        })
    }
}

/// Assemble the single and adjoint double layers of `curve`.
pub fn assemble_layers(curve: &PeriodicCurve, green: &PeriodicGreen) -> LayerOperators {
    assemble(curve, green, false).0
}

/// Layers plus the boundary route to `v_E`, `∂_ν v_E` and `∫|Dv_E|²`:
/// `v_E = 2∫ ν(y)·∇G2(x−y) ds`, `∇v_E = −2 S[ν]`, `∫|Dv_E|² = 4∬ ν·ν′ G2 ds ds′`.
pub fn assemble_with_potential(curve: &PeriodicCurve, green: &PeriodicGreen) -> (LayerOperators, BoundaryPotential) {
    let (ops, pot) = assemble(curve, green, true);
    (ops, pot.expect("potential requested"))
}

struct Row {
    k: Vec<f64>,
    a: Vec<f64>,
    v: f64,
    e: f64,
}

fn assemble(curve: &PeriodicCurve, green: &PeriodicGreen, potential: bool) -> (LayerOperators, Option<BoundaryPotential>) {
    let pts = curve.lifted_points();
    let normals = curve.normals();
    let weights = curve.weights();
    let kappa = curve.kappa();
    let frames = curve.frames();
    let offsets = curve.offsets();
    let n = pts.len();
    let mut loop_of = Vec::with_capacity(n);
    for (l, f) in frames.iter().enumerate() {
        loop_of.extend(std::iter::repeat_n(l, f.len()));
    }
    let kress: Vec<Vec<f64>> = frames.iter().map(|f| kress_weights(f.len())).collect();
    let r0 = green.regular_origin();
    let speed: Vec<f64> = frames.iter().flat_map(|f| f.speed.iter().copied()).collect();
    let g2_0 = green.g2_at([0.0, 0.0]);

    let rows: Vec<Row> = par::map_indexed(n, |i| {
        let li = loop_of[i];
        let (start, end) = (offsets[li], offsets[li + 1]);
        let ni = end - start;
        let mut k = vec![0.0; n];
        let mut a = vec![0.0; n];
        let (mut v, mut e) = (0.0, 0.0);
        for j in 0..n {
            let r = [pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]];
            if i == j {
                k[j] = r0 - speed[i].ln() / (2.0 * PI) - ni as f64 / (8.0 * PI * PI) * kress[li][0];
                a[j] = -kappa[i] * weights[i] / (4.0 * PI);
                if potential {
                    // G2 ≈ (1/8π) s² ln|s| along the curve and ν·∇G2 ≈ −(κ/8π) s² ln|s|;
                    // the trapezoid rule misses −2ζ′(−2) h³ times that coefficient
                    let h3 = weights[i].powi(3);
                    e += weights[i] * (weights[i] * g2_0 + 2.0 * ZETA_PRIME_M2 * h3 / (8.0 * PI));
                    v += 2.0 * 2.0 * ZETA_PRIME_M2 * h3 * (-kappa[i] / (8.0 * PI));
                }
                continue;
            }
            let (g, grad) = green.g_and_grad_at(r);
            a[j] = dot(normals[i], grad) * weights[j];
            if lj_same(j, start, end) {
                let d = (i + ni - j) % ni;
                let t = 2.0 * PI * d as f64 / ni as f64;
                let log4sin2 = (4.0 * (0.5 * t).sin().powi(2)).ln();
                k[j] = g + log4sin2 / (4.0 * PI) - ni as f64 / (8.0 * PI * PI) * kress[li][d];
            } else {
                k[j] = g;
            }
            if potential {
                let g2g = green.grad_g2_at(r);
                // ∇_x G2(x − y) at x = x_i, y = x_j
                v += 2.0 * dot(normals[j], g2g) * weights[j];
                e += weights[i] * weights[j] * dot(normals[i], normals[j]) * green.g2_at(r);
            }
        }
        Row { k, a, v, e }
    });

    let mut kernel = DMatrix::zeros(n, n);
    let mut adjoint = DMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    let mut energy = 0.0;
    for (i, row) in rows.into_iter().enumerate() {
        for j in 0..n {
            kernel[(i, j)] = row.k[j];
            adjoint[(i, j)] = row.a[j];
        }
        vals.push(row.v);
        energy += row.e;
    }
    // the smooth part is symmetric analytically; enforce it to round-off
    let kt = kernel.transpose();
    kernel = (kernel + kt) * 0.5;
    let ops = LayerOperators { kernel, adjoint, weights, normals, kappa };
    let pot = potential.then(|| {
        let dn = ops.potential_normal_derivative();
        BoundaryPotential {
            trace: PotentialTrace {
                boundary_values: CurveSamples::new(SampleKind::BoundaryData, vals),
                normal_derivative: CurveSamples::new(SampleKind::Generic, dn),
            },
            nonlocal_energy: 4.0 * energy,
        }
    });
    (ops, pot)
}

#[inline]
fn lj_same(j: usize, start: usize, end: usize) -> bool {
    j >= start && j < end
}
