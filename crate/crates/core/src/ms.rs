//! The two-phase jump problem behind the Mullins–Sekerka velocity.
//!
//! `w` is harmonic off `∂E` with trace `g`. Writing `w = S[σ] + c` with
//! `∫σ ds = 0` gives the first-kind bordered system `[K 1; 1ᵀ 0][μ; c] = [g; 0]`
//! for `μ = w∘σ`. The layer-potential jump relations then give
//! `∂_ν w^± = K*σ ∓ σ/2` (`+` the side `ν` points into, outside `E`), so the
//! jump `[∂_ν w] = ∂_ν w⁺ − ∂_ν w⁻ = −σ`. With `V = [∂_ν w]` and `g = κ`, the
//! perimeter decreases at the rate `∫ g V ds = −∫|Dw|²`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::geometry::{CurveSamples, PeriodicCurve, SampleKind};
use crate::green::PeriodicGreen;
use crate::layer::{assemble_layers, assemble_with_potential, BoundaryPotential, LayerOperators};

/// Solution of the jump problem for one boundary datum.
#[derive(Debug, Clone)]
pub struct JumpSolution {
    /// Single-layer density `σ`.
    pub density: CurveSamples,
    pub boundary_data: CurveSamples,
    pub jump: CurveSamples,
    /// `(∂_ν w⁺, ∂_ν w⁻)`.
    pub one_sided: (CurveSamples, CurveSamples),
    pub additive_constant: f64,
    /// `μ = w∘σ`, the density times the quadrature weights.
    pub weighted_density: Vec<f64>,
}

impl JumpSolution {
    /// `−∫ g [∂_ν w] ds = ∫|Dw|²`.
    pub fn dissipation(&self) -> f64 {
        self.boundary_data.values.iter().zip(&self.weighted_density).map(|(g, m)| g * m).sum()
    }

    /// `loop,idx,s,g,sigma,jump,dnw_plus,dnw_minus`, `s` the arclength from marker 0.
    pub fn write_csv(&self, curve: &PeriodicCurve, w: &mut impl Write) -> Result<()> {
        writeln!(w, "loop,idx,s,g,sigma,jump,dnw_plus,dnw_minus")?;
        let mut k = 0;
        for (l, f) in curve.frames().iter().enumerate() {
            let mut s = 0.0;
            for (j, wt) in f.weights.iter().enumerate() {
                writeln!(
                    w,
                    "{l},{j},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    s,
                    self.boundary_data.values[k],
                    self.density.values[k],
                    self.jump.values[k],
                    self.one_sided.0.values[k],
                    self.one_sided.1.values[k]
                )?;
                s += wt;
                k += 1;
            }
        }
        Ok(())
    }
}

/// Factorised bordered system for one curve; reusable across data.
#[derive(Debug, Clone)]
pub struct JumpSolver {
    pub ops: LayerOperators,
    lu: LU<f64, Dyn, Dyn>,
    condition: f64,
}

impl JumpSolver {
    pub fn new(ops: LayerOperators) -> Result<Self> {
        let n = ops.len();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&ops.kernel);
        for i in 0..n {
            m[(i, n)] = 1.0;
            m[(n, i)] = 1.0;
        }
        let lu = m.lu();
        let diag = lu.u().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !condition.is_finite() || condition > 1e14 {
            return Err(Error::Resolution(format!("single-layer system is singular (estimate {condition:.3e})")));
        }
        Ok(Self { ops, lu, condition })
    }

    pub fn for_curve(curve: &PeriodicCurve, green: &PeriodicGreen) -> Result<Self> {
        Self::new(assemble_layers(curve, green))
    }

    /// Pivot-ratio estimate of the bordered system's condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, g: &[f64]) -> Result<JumpSolution> {
        let n = self.ops.len();
        if g.len() != n {
            return Err(Error::InvalidInput(format!("{} data values for {n} markers", g.len())));
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from_slice(g);
        let x = self.lu.solve(&rhs).ok_or_else(|| Error::Resolution("bordered system is singular".into()))?;
        let mu: Vec<f64> = x.rows(0, n).iter().copied().collect();
        let sigma: Vec<f64> = mu.iter().zip(&self.ops.weights).map(|(m, w)| m / w).collect();
        let ks = self.ops.adjoint_apply(&sigma);
        let plus: Vec<f64> = ks.iter().zip(&sigma).map(|(k, s)| k - 0.5 * s).collect();
        let minus: Vec<f64> = ks.iter().zip(&sigma).map(|(k, s)| k + 0.5 * s).collect();
        let jump = sigma.iter().map(|s| -s).collect();
        Ok(JumpSolution {
            density: CurveSamples::new(SampleKind::Density, sigma),
            boundary_data: CurveSamples::new(SampleKind::BoundaryData, g.to_vec()),
            jump: CurveSamples::new(SampleKind::Velocity, jump),
            one_sided: (CurveSamples::new(SampleKind::Generic, plus), CurveSamples::new(SampleKind::Generic, minus)),
            additive_constant: x[n],
            weighted_density: mu,
        })
    }
}

/// One-shot solve of the jump problem with data `g`.
pub fn solve_jump(curve: &PeriodicCurve, g: &CurveSamples, green: &PeriodicGreen) -> Result<JumpSolution> {
    JumpSolver::for_curve(curve, green)?.solve(&g.values)
}

/// Everything computed while evaluating the MS velocity of one curve.
#[derive(Debug, Clone)]
pub struct MsEvaluation {
    pub velocity: CurveSamples,
    pub solution: JumpSolution,
    pub solver: JumpSolver,
    /// Present when `γ > 0`.
    pub potential: Option<BoundaryPotential>,
}

/// `V = [∂_ν w]` for the datum `g = κ + 4γ v_E`.
pub fn ms_normal_velocity(curve: &PeriodicCurve, gamma: f64, green: &PeriodicGreen) -> Result<MsEvaluation> {
    if gamma < 0.0 {
        return Err(Error::InvalidInput(format!("γ = {gamma} must be non-negative")));
    }
    let kappa = curve.kappa();
    let (ops, potential) = if gamma > 0.0 {
        let (ops, pot) = assemble_with_potential(curve, green);
        (ops, Some(pot))
    } else {
        (assemble_layers(curve, green), None)
    };
    let g: Vec<f64> = match &potential {
        Some(p) => kappa.iter().zip(&p.trace.boundary_values.values).map(|(k, v)| k + 4.0 * gamma * v).collect(),
        None => kappa,
    };
    let solver = JumpSolver::new(ops)?;
    let solution = solver.solve(&g)?;
    Ok(MsEvaluation { velocity: solution.jump.clone(), solution, solver, potential })
}

/// `∫|Dw|² = −∫ g [∂_ν w] ds`.
pub fn dissipation_ms(solution: &JumpSolution) -> f64 {
    solution.dissipation()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::field::{dirichlet_energy, line_measure_potential};
    use crate::geometry::MarkerLoop;
    use crate::spectral::TrigInterpolant;
    use crate::geometry::shapes::{circle, perturbed_circle, strip, StripAngle};

    fn green() -> PeriodicGreen {
        PeriodicGreen::default()
    }

    #[test]
    fn constant_data_gives_zero_jump() {
        let c = perturbed_circle([0.5, 0.5], 0.2, 3, 0.02, 64).unwrap();
        let s = solve_jump(&c, &CurveSamples::new(SampleKind::BoundaryData, vec![2.0; 64]), &green()).unwrap();
        assert!(s.jump.max_abs() < 1e-10);
        assert!((s.additive_constant - 2.0).abs() < 1e-10);
    }

    #[test]
    fn circle_is_stationary() {
        let c = circle([0.5, 0.5], 0.2, 64, true).unwrap();
        let e = ms_normal_velocity(&c, 0.0, &green()).unwrap();
        assert!(e.velocity.max_abs() < 1e-8);
    }

    #[test]
    fn strip_fourier_oracle() {
        let h = 0.3;
        let c = strip(h, 0.0, StripAngle::Horizontal, 64).unwrap();
        for k in 1..=3 {
            let q = 2.0 * PI * k as f64;
            let pts = c.lifted_points();
            let g: Vec<f64> = pts.iter().enumerate().map(|(i, p)| if i >= 64 { (q * p[0]).cos() } else { 0.0 }).collect();
            let s = solve_jump(&c, &CurveSamples::new(SampleKind::BoundaryData, g), &green()).unwrap();
            let coth = |x: f64| 1.0 / x.tanh();
            let csch = |x: f64| 1.0 / x.sinh();
            let top = -q * (coth(q * h) + coth(q * (1.0 - h)));
            let bot = q * (csch(q * h) + csch(q * (1.0 - h)));
            for (i, p) in pts.iter().enumerate() {
                let exact = if i >= 64 { top } else { bot } * (q * p[0]).cos();
                assert!((s.jump.values[i] - exact).abs() <= 1e-6 * top.abs(), "k={k} i={i}");
            }
        }
    }

    #[test]
    fn zero_mean_positive_and_self_adjoint() {
        let c = perturbed_circle([0.4, 0.5], 0.2, 2, 0.02, 64).unwrap();
        let solver = JumpSolver::for_curve(&c, &green()).unwrap();
        let pts = c.lifted_points();
        let g1: Vec<f64> = pts.iter().map(|p| (2.0 * PI * p[0]).sin() + p[1]).collect();
        let g2: Vec<f64> = pts.iter().map(|p| (4.0 * PI * p[1]).cos() * p[0]).collect();
        let s1 = solver.solve(&g1).unwrap();
        let s2 = solver.solve(&g2).unwrap();
        let v = &s1.jump.values;
        assert!(c.integrate(v).abs() <= 1e-8 * s1.jump.max_abs() * crate::geometry::perimeter(&c));
        assert!(s1.dissipation() > 0.0 && s2.dissipation() > 0.0);
        let a: f64 = c.integrate(&g1.iter().zip(&s2.jump.values).map(|(x, y)| x * y).collect::<Vec<_>>());
        let b: f64 = c.integrate(&g2.iter().zip(&s1.jump.values).map(|(x, y)| x * y).collect::<Vec<_>>());
        assert!((a - b).abs() < 1e-9 * a.abs().max(b.abs()));
        for i in 0..v.len() {
            let d = s1.one_sided.0.values[i] - s1.one_sided.1.values[i];
            assert!((d - v[i]).abs() < 1e-12 * s1.jump.max_abs());
        }
    }

    #[test]
    fn dissipation_matches_grid_reconstruction() {
        let c = perturbed_circle([0.5, 0.5], 0.2, 3, 0.01, 64).unwrap();
        let e = ms_normal_velocity(&c, 0.0, &green()).unwrap();
        let d = dissipation_ms(&e.solution);
        // w − c is the potential of the line measure σ ds; sample it densely so
        // the measure is resolved beyond the grid's Nyquist band
        let m = 8 * 64;
        let lp = c.loops()[0].interpolant();
        let sig = TrigInterpolant::new(&e.solution.density.values);
        let alphas: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
        let fine = PeriodicCurve::new(vec![MarkerLoop::new(alphas.iter().map(|&a| lp.point(a)).collect(), [0, 0], 1).unwrap()]).unwrap();
        let phi = CurveSamples::new(SampleKind::Density, alphas.iter().map(|&a| sig.eval(a)).collect());
        let en: Vec<f64> = [128, 256]
            .iter()
            .map(|&n| dirichlet_energy(&line_measure_potential(&fine, &phi, n, 0.0).unwrap().0))
            .collect();
        // the truncated tail decays like 1/n
        let grid = 2.0 * en[1] - en[0];
        assert!((grid - d).abs() < 0.01 * d, "{en:?} {grid} vs {d}");
    }

    #[test]
    fn refinement_is_spectral() {
        let exact = {
            let c = perturbed_circle([0.5, 0.5], 0.2, 2, 0.01, 256).unwrap();
            ms_normal_velocity(&c, 0.0, &green()).unwrap().velocity.values[0]
        };
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let c = perturbed_circle([0.5, 0.5], 0.2, 2, 0.01, n).unwrap();
            errs.push((ms_normal_velocity(&c, 0.0, &green()).unwrap().velocity.values[0] - exact).abs());
        }
        assert!(errs[0] / errs[1] >= 10.0 || errs[1] < 1e-10, "{errs:?}");
    }
}
