use super::*;
use crate::geometry::shapes::{circle, ellipse, strip, StripAngle};
use crate::geometry::MarkerLoop;

fn green() -> PeriodicGreen {
    PeriodicGreen::default()
}

fn two_circles() -> PeriodicCurve {
    let a = circle([0.25, 0.25], 0.1, 48, true).unwrap();
    let b = circle([0.7, 0.7], 0.15, 48, true).unwrap();
    let loops: Vec<MarkerLoop> = a.into_loops().into_iter().chain(b.into_loops()).collect();
    PeriodicCurve::new(loops).unwrap()
}

#[test]
fn circle_modes_and_gap() {
    let r = 0.2;
    let c = circle([0.5, 0.5], r, 64, true).unwrap();
    let m = assemble_second_variation(&c, 0.0, 6, NonlocalRoute::Boundary, &green()).unwrap();
    let rep = spectrum(&m, &c).unwrap();
    assert!(rep.critical);
    assert_eq!(rep.eigenvalues.len(), 12);
    // modes 1..6, each doubled; mode 1 are the translations
    for (i, ev) in rep.eigenvalues.iter().enumerate() {
        let k = (i / 2 + 1) as f64;
        let exact = (k * k - 1.0) / (r * r);
        assert!((ev - exact).abs() < 1e-6 * (1.0 + exact), "{i}: {ev} vs {exact}");
    }
    assert_eq!(rep.translation_modes, vec![0, 1]);
    assert!((rep.gap_on_t_perp - 75.0).abs() < 1e-6);
    assert_eq!(rep.classification, Classification::StrictlyStable);
}

#[test]
fn lamella_gap_at_zero_gamma() {
    let c = strip(0.5, 0.25, StripAngle::Horizontal, 32).unwrap();
    let m = assemble_second_variation(&c, 0.0, 6, NonlocalRoute::Boundary, &green()).unwrap();
    let rep = spectrum(&m, &c).unwrap();
    let exact = (2.0 * PI).powi(2);
    assert!((rep.gap_on_t_perp - exact).abs() < 1e-6 * exact, "{}", rep.gap_on_t_perp);
    assert_eq!(rep.translation_modes.len(), 1);
    assert_eq!(rep.classification, Classification::StrictlyStable);
}

#[test]
fn translation_basis_sizes() {
    let c = circle([0.5, 0.5], 0.2, 64, true).unwrap();
    assert_eq!(translation_basis(&c).functions.len(), 2);
    let h = strip(0.4, 0.1, StripAngle::Horizontal, 32).unwrap();
    let tb = translation_basis(&h);
    assert_eq!(tb.functions.len(), 1);
    assert!(tb.directions[0][1].abs() > 1.0 - 1e-12);
    let d = strip(0.4, 0.1, StripAngle::Diagonal, 64).unwrap();
    let tb = translation_basis(&d);
    assert_eq!(tb.functions.len(), 1);
    assert!((tb.directions[0][0].abs() - tb.directions[0][1].abs()).abs() < 1e-10);
}

#[test]
fn translation_distance() {
    let c = circle([0.5, 0.5], 0.2, 64, true).unwrap();
    let nu = c.normals();
    let tx: Vec<f64> = nu.iter().map(|n| n[0]).collect();
    assert!(min_translation_distance(&tx, &c).unwrap() < 1e-6);
    let k = c.kappa();
    let ones = vec![1.0; k.len()];
    assert!((min_translation_distance(&ones, &c).unwrap() - 1.0).abs() < 1e-12);
    assert!(min_translation_distance(&vec![0.0; 64], &c).is_err());
}

#[test]
fn gamma_enters_linearly() {
    let c = strip(0.5, 0.25, StripAngle::Horizontal, 32).unwrap();
    let g = green();
    let t = |gamma| assemble_second_variation(&c, gamma, 4, NonlocalRoute::Boundary, &g).unwrap().total();
    let (a0, a1, a2) = (t(0.0), t(1.0), t(2.0));
    let second = &a2 - &a1 * 2.0 + &a0;
    assert!(second.amax() < 1e-9 * a2.amax());
    // the nonlocal shift lowers the lamella gap
    let s = |gamma| spectrum(&assemble_second_variation(&c, gamma, 4, NonlocalRoute::Boundary, &g).unwrap(), &c).unwrap();
    assert!(s(5.0).gap_on_t_perp < s(0.0).gap_on_t_perp);
}

#[test]
fn quadratic_form_agrees_with_direct_form() {
    let c = circle([0.5, 0.5], 0.2, 64, true).unwrap();
    let g = green();
    let m = assemble_second_variation(&c, 3.0, 4, NonlocalRoute::Boundary, &g).unwrap();
    let coeffs = [0.0, 0.3, -0.2, 0.5, 0.1, 0.0, 0.0, -0.4, 0.25];
    let phi: Vec<f64> = (0..c.n_markers()).map(|i| (0..9).map(|j| m.basis[(i, j)] * coeffs[j]).sum()).collect();
    let direct = second_variation_form(&c, 3.0, &phi, &g).total();
    let q = m.quadratic_form(&coeffs);
    assert!((q - direct).abs() < 1e-9 * direct.abs(), "{q} vs {direct}");
}

#[test]
fn grid_route_matches_boundary_route() {
    let c = strip(0.5, 0.25, StripAngle::Horizontal, 32).unwrap();
    let g = green();
    let b = assemble_second_variation(&c, 1.0, 3, NonlocalRoute::Boundary, &g).unwrap();
    let r = assemble_second_variation(&c, 1.0, 3, NonlocalRoute::Grid { n: 256, sigma_cells: 1.0 }, &g).unwrap();
    let diff = (&b.nonlocal_kernel_part - &r.nonlocal_kernel_part).amax();
    assert!(diff < 1e-3 * b.nonlocal_kernel_part.amax(), "{diff:.3e}");
}

#[test]
fn ellipse_is_flagged_as_non_critical() {
    let c = ellipse([0.5, 0.5], 0.3, 0.12, 128, true).unwrap();
    let m = assemble_second_variation(&c, 0.0, 6, NonlocalRoute::Boundary, &green()).unwrap();
    assert!(m.criticality.linf > criticality_tolerance(&c));
    let rep = spectrum(&m, &c).unwrap();
    assert!(!rep.critical);
    assert!(rep.eigenvalues[0] < 0.0);
    assert!(rep.warnings.iter().any(|w| w.contains("non-critical")));
}

#[test]
fn criticality_of_standard_sets() {
    let g = green();
    let c = circle([0.5, 0.5], 0.2, 64, true).unwrap();
    let k = criticality_residual(&c, 0.0, &g);
    assert!(k.linf < 1e-8 && (k.lambda - 5.0).abs() < 1e-10);
    let s = strip(0.5, 0.25, StripAngle::Horizontal, 32).unwrap();
    assert!(criticality_residual(&s, 10.0, &g).linf < criticality_tolerance(&s));
    // a centred strip sees the same potential on both sides only when h = 1/2
    let s = strip(0.3, 0.1, StripAngle::Horizontal, 32).unwrap();
    assert!(criticality_residual(&s, 10.0, &g).linf < criticality_tolerance(&s));
    let e = ellipse([0.5, 0.5], 0.3, 0.12, 128, true).unwrap();
    assert!(criticality_residual(&e, 0.0, &g).linf > 1.0);
}

#[test]
fn poincare_ratios() {
    let c = circle([0.5, 0.5], 0.2, 64, true).unwrap();
    assert_eq!(geometric_poincare_ratio(&c).ratio, Some(0.0));
    let s = strip(0.3, 0.1, StripAngle::Horizontal, 32).unwrap();
    assert_eq!(geometric_poincare_ratio(&s).ratio, Some(0.0));
    assert!(geometric_poincare_ratio(&two_circles()).is_infinite());
    let e = ellipse([0.5, 0.5], 0.3, 0.2, 128, true).unwrap();
    let r = geometric_poincare_ratio(&e).ratio.unwrap();
    assert!(r > 0.0 && r.is_finite());
}

#[test]
fn lamella_threshold_without_nonlocal_term() {
    let res = lamella_threshold(0.0, 4, &LamellaSweep::default(), &green()).unwrap();
    assert_eq!(res.k, Some(1));
    assert_eq!(res.entries.len(), 1);
    assert!(lamella_threshold(1.0, 17, &LamellaSweep::default(), &green()).is_err());
}


#[test]
fn translation_distance_of_a_mix() {
    let c = circle([0.5, 0.5], 0.2, 64, true).unwrap();
    let ip = |a: &[f64], b: &[f64]| c.integrate(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>());
    let ex: Vec<f64> = c.normals().iter().map(|n| n[0]).collect();
    let n = c.n_markers();
    let c2: Vec<f64> = (0..n).map(|j| (4.0 * PI * j as f64 / n as f64).cos()).collect();
    assert!((min_translation_distance(&c2, &c).unwrap() - 1.0).abs() < 1e-12);
    let (na, nb) = (ip(&ex, &ex).sqrt(), ip(&c2, &c2).sqrt());
    let (a, b) = (0.6, -1.7);
    let mix: Vec<f64> = (0..n).map(|i| a * ex[i] / na + b * c2[i] / nb).collect();
    let d = min_translation_distance(&mix, &c).unwrap();
    assert!((d - b.abs() / (a * a + b * b).sqrt()).abs() < 1e-10, "{d}");
}

#[test]
fn translations_lie_in_the_kernel() {
    let g = green();
    for (c, gamma) in [
        (circle([0.5, 0.5], 0.2, 64, true).unwrap(), 0.0),
        (strip(0.5, 0.25, StripAngle::Horizontal, 32).unwrap(), 4.0),
    ] {
        for f in translation_basis(&c).functions {
            let df = c.map_loops(&f, |fr, p| fr.d_s(p));
            let h1 = c.integrate(&f.iter().zip(&df).map(|(a, b)| a * a + b * b).collect::<Vec<_>>());
            let q = second_variation_form(&c, gamma, &f, &g).total();
            assert!(q.abs() <= 1e-6 * h1, "{q:e} vs {h1}");
        }
    }
}
