use std::f64::consts::PI;

use proptest::prelude::*;

use super::shapes::*;
use super::*;

/// Adaptive Simpson quadrature, used as an independent oracle.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[test]
fn circle_area_perimeter_and_complement() {
    let c = circle([0.4, 0.6], 0.2, 256, true).unwrap();
    assert!((perimeter(&c) - 0.4 * PI).abs() < 1e-12);
    assert!((enclosed_area(&c).unwrap() - 0.04 * PI).abs() < 1e-13);
    let k = curvature(&c).unwrap();
    assert!(k.values.iter().all(|v| (v - 5.0).abs() < 1e-8));
    let co = circle([0.4, 0.6], 0.2, 64, false).unwrap();
    assert!((enclosed_area(&co).unwrap() - (1.0 - 0.04 * PI)).abs() < 1e-13);
    assert!(curvature(&co).unwrap().values.iter().all(|v| (v + 5.0).abs() < 1e-10));
    let c4 = circle([0.5, 0.5], 0.25, 256, true).unwrap();
    assert!(curvature(&c4).unwrap().values.iter().all(|v| (v - 4.0).abs() < 1e-8));
}

#[test]
fn strip_areas_in_three_directions() {
    for (angle, len) in [(StripAngle::Horizontal, 1.0), (StripAngle::Vertical, 1.0), (StripAngle::Diagonal, 2f64.sqrt())] {
        let c = strip(0.3, 0.1, angle, 64).unwrap();
        assert!((enclosed_area(&c).unwrap() - 0.3).abs() < 1e-14, "{angle:?}");
        assert!((perimeter(&c) - 2.0 * len).abs() < 1e-13);
        assert!(curvature(&c).unwrap().max_abs() < 1e-12);
    }
    let l = lamella_k(3, 0.5, 0.05, 32).unwrap();
    assert!((enclosed_area(&l).unwrap() - 0.5).abs() < 1e-14);
    assert_eq!(l.loops().len(), 6);
}

#[test]
fn orientation_errors() {
    let a = line_loop_for_test(0.1, 1);
    let b = line_loop_for_test(0.4, 1);
    let err = PeriodicCurve::new(vec![a, b]).unwrap_err();
    assert!(matches!(err, Error::Orientation(_)));
    let cw: Vec<[f64; 2]> = (0..32)
        .map(|j| {
            let t = -2.0 * PI * j as f64 / 32.0;
            [0.5 + 0.2 * t.cos(), 0.5 + 0.2 * t.sin()]
        })
        .collect();
    let l = MarkerLoop::new(cw, [0, 0], 1).unwrap();
    assert!(matches!(PeriodicCurve::new(vec![l]).unwrap_err(), Error::Orientation(_)));
}

fn line_loop_for_test(y: f64, o: i8) -> MarkerLoop {
    MarkerLoop::new((0..32).map(|j| [j as f64 / 32.0, y]).collect(), [1, 0], o).unwrap()
}

#[test]
fn too_few_markers_is_a_resolution_error() {
    let m = (0..8).map(|j| [j as f64 / 8.0, 0.5]).collect();
    assert!(matches!(MarkerLoop::new(m, [1, 0], 1), Err(Error::Resolution(_))));
}

#[test]
fn graph_curvature_matches_closed_form() {
    let eps = 1e-3;
    let base = strip(0.5, 0.0, StripAngle::Horizontal, 128).unwrap();
    let c = perturbed_lamella(&base, 1, &[0.0, eps], 128).unwrap();
    let fr = &c.frames()[1];
    for (x, k) in fr.lifted.iter().zip(&fr.kappa) {
        let t = 2.0 * PI * x[0];
        let d1 = eps * 2.0 * PI * t.cos();
        let d2 = -eps * 4.0 * PI * PI * t.sin();
        let exact = -d2 / (1.0 + d1 * d1).powf(1.5);
        assert!((k - exact).abs() < 1e-10, "{k} vs {exact}");
    }
}

#[test]
fn resample_irregular_circle() {
    let m: Vec<[f64; 2]> = (0..64)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / 64.0;
            let t = a + 0.1 * a.sin();
            [0.5 + 0.2 * t.cos(), 0.5 + 0.2 * t.sin()]
        })
        .collect();
    let c = PeriodicCurve::new(vec![MarkerLoop::new(m, [0, 0], 1).unwrap()]).unwrap();
    let r = resample_equal_arclength(&c, 128).unwrap();
    assert_eq!(r.n_markers(), 128);
    let h = 2.0 * PI * 0.2 / 128.0;
    let lift = r.lifted_points();
    for j in 0..128 {
        let (a, b) = (lift[j], lift[(j + 1) % 128]);
        // chord of an arc of length h on a circle of radius 0.2
        let chord = 2.0 * 0.2 * (h / 0.4).sin();
        assert!((dist(a, b) - chord).abs() < 1e-12);
    }
    assert!(spacing_error(&r) < 1e-10);
}

#[test]
fn resample_lamella_line() {
    let m = (0..40).map(|j| {
        let x = (j as f64 + 0.3 * ((j * 7 % 5) as f64 / 5.0)) / 40.0;
        [x, 0.3]
    });
    let a = MarkerLoop::new(m.collect(), [1, 0], 1).unwrap();
    let b = line_loop_for_test(0.6, -1);
    let c = PeriodicCurve::new(vec![a, b]).unwrap();
    let r = resample_equal_arclength(&c, 64).unwrap();
    let first = r.loops()[0].markers()[0][0];
    for (j, p) in r.loops()[0].markers().iter().enumerate() {
        let x = reduce(first + j as f64 / 64.0);
        assert!(min_image(p[0] - x).abs() < 1e-12);
        assert!((p[1] - 0.3).abs() < 1e-15);
    }
}

#[test]
fn resample_perturbed_circle_preserves_area() {
    let base = circle([0.5, 0.5], 0.2, 256, true).unwrap();
    let c = perturbed(&base, |_, t| 0.01 * (3.0 * t).cos(), 256).unwrap();
    let r = resample_equal_arclength(&c, 256).unwrap();
    assert!(spacing_error(&r) < 1e-10);
    // area of r(θ) = 0.2 + 0.01 cos 3θ by quadrature of ½ r²
    let exact = simpson(&|t: f64| 0.5 * (0.2 + 0.01 * (3.0 * t).cos()).powi(2), 0.0, 2.0 * PI, 1e-15);
    let a = enclosed_area(&r).unwrap();
    assert!((a - exact).abs() / exact < 1e-10, "{a} vs {exact}");
    let again = resample_equal_arclength(&r, 256).unwrap();
    let drift = r
        .lifted_points()
        .iter()
        .zip(again.lifted_points())
        .map(|(a, b)| dist(*a, b))
        .fold(0.0, f64::max);
    assert!(drift < 1e-12, "idempotence drift {drift}");
}

#[test]
fn ellipse_perimeter_against_quadrature() {
    let (a, b) = (0.2, 0.1);
    let e = ellipse([0.5, 0.5], a, b, 256, true).unwrap();
    let exact = simpson(&|t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt(), 0.0, 2.0 * PI, 1e-15);
    assert!((perimeter(&e) - exact).abs() / exact < 1e-8);
    assert!((enclosed_area(&e).unwrap() - PI * a * b).abs() < 1e-10);
}

#[test]
fn arclength_operators() {
    let r = 0.2;
    let c = circle([0.5, 0.5], r, 64, true).unwrap();
    let f: Vec<f64> = (0..64).map(|j| (3.0 * 2.0 * PI * j as f64 / 64.0).cos()).collect();
    let s = CurveSamples::new(SampleKind::Generic, f.clone());
    let lap = surface_laplacian(&c, &s).unwrap();
    let d = arclength_derivative(&c, &s).unwrap();
    for j in 0..64 {
        let t = 2.0 * PI * j as f64 / 64.0;
        assert!((lap.values[j] + 9.0 / (r * r) * f[j]).abs() < 1e-10);
        assert!((d.values[j] + 3.0 / r * (3.0 * t).sin()).abs() < 1e-11);
    }
    let consts = CurveSamples::new(SampleKind::Generic, vec![2.5; 64]);
    assert!(surface_laplacian(&c, &consts).unwrap().max_abs() < 1e-12);

    let l = strip(0.3, 0.0, StripAngle::Horizontal, 64).unwrap();
    let g: Vec<f64> = l.lifted_points().iter().map(|p| (2.0 * PI * 2.0 * p[0]).sin()).collect();
    let lap = surface_laplacian(&l, &CurveSamples::new(SampleKind::Generic, g.clone())).unwrap();
    for (a, b) in lap.values.iter().zip(&g) {
        assert!((a + 16.0 * PI * PI * b).abs() < 1e-9);
    }
}

#[test]
fn integration_by_parts_and_gauss_bonnet() {
    let base = circle([0.3, 0.7], 0.2, 128, true).unwrap();
    let c = perturbed(&base, |_, t| 0.02 * (2.0 * t).sin() + 0.01 * (5.0 * t).cos(), 128).unwrap();
    let pts = c.lifted_points();
    let f: Vec<f64> = pts.iter().map(|p| (2.0 * PI * p[0]).sin() * p[1]).collect();
    let g: Vec<f64> = pts.iter().map(|p| (p[0] - 0.3).powi(2) + (2.0 * PI * p[1]).cos()).collect();
    let fr = &c.frames()[0];
    let lhs = fr.integrate(&fr.laplacian(&f).iter().zip(&g).map(|(a, b)| a * b).collect::<Vec<_>>());
    let rhs = -fr.integrate(&fr.d_s(&f).iter().zip(fr.d_s(&g)).map(|(a, b)| a * b).collect::<Vec<_>>());
    assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs());
    let gb = c.integrate(&c.kappa());
    assert!((gb - 2.0 * PI).abs() < 1e-8 * 2.0 * PI);
    let co = circle([0.5, 0.5], 0.2, 64, false).unwrap();
    assert!((co.integrate(&co.kappa()) + 2.0 * PI).abs() < 1e-8 * 2.0 * PI);
}

#[test]
fn signed_distance_examples() {
    let c = circle([0.5, 0.5], 0.2, 256, true).unwrap();
    let d = signed_distance_grid(&c, 100).unwrap();
    assert!((d.at(50, 50) + 0.2).abs() < 1e-4);
    // node (0.7, 0.5) is a marker of the circle
    assert!(d.at(70, 50).abs() < 1e-14);
    let s = strip(0.3, 0.0, StripAngle::Horizontal, 64).unwrap();
    let ds = signed_distance_grid(&s, 100).unwrap();
    assert!((ds.at(10, 65) - 0.35).abs() < 1e-14);
    assert!((ds.at(10, 15) + 0.15).abs() < 1e-14);
    assert!(ds.at(3, 0).abs() < 1e-15);
}

#[test]
fn height_function_examples() {
    let r = circle([0.5, 0.5], 0.2, 128, true).unwrap();
    let same = height_function(&r, &r).unwrap();
    assert!(same.max_abs() < 1e-12);
    let big = circle([0.5, 0.5], 0.21, 128, true).unwrap();
    let psi = height_function(&big, &r).unwrap();
    assert!(psi.values.iter().all(|v| (v - 0.01).abs() < 1e-10));
    let l = strip(0.5, 0.3, StripAngle::Horizontal, 64).unwrap();
    let p = perturbed_lamella(&l, 1, &[0.01, 0.0], 64).unwrap();
    let psi = height_function(&p, &l).unwrap();
    for (j, v) in psi.values[..64].iter().enumerate() {
        let x = j as f64 / 64.0;
        // the bottom interface has outer normal −y
        assert!((v + 0.01 * (2.0 * PI * x).sin()).abs() < 1e-10, "{j}: {v}");
    }
    assert!(psi.values[64..].iter().all(|v| v.abs() < 1e-12));
    let far = circle([0.5, 0.5], 0.3, 128, true).unwrap();
    assert!(matches!(height_function(&far, &r), Err(Error::GraphFailure(_))));
}

#[test]
fn tubular_radius_cases() {
    let c = circle([0.5, 0.5], 0.2, 64, true).unwrap();
    assert!((tubular_radius(&c) - 0.09).abs() < 1e-12);
    let s = strip(0.3, 0.0, StripAngle::Horizontal, 32).unwrap();
    assert!((tubular_radius(&s) - 0.15).abs() < 1e-12);
}

#[test]
fn intersecting_loops_are_rejected() {
    let a = circle([0.4, 0.5], 0.15, 64, true).unwrap().into_loops();
    let b = circle([0.55, 0.5], 0.15, 64, true).unwrap().into_loops();
    let err = PeriodicCurve::new(a.into_iter().chain(b).collect()).unwrap_err();
    assert!(matches!(err, Error::Topology(_) | Error::Orientation(_)));
    let a = circle([0.4, 0.5], 0.15, 64, true).unwrap();
    let b = a.translated([0.15, 0.0]);
    assert!(self_intersection(&PeriodicCurve::from_loops_unchecked(
        a.into_loops().into_iter().chain(b.into_loops()).collect()
    ))
    .is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn area_and_length_invariant_under_translation(
        dx in -2.0f64..2.0, dy in -2.0f64..2.0, a2 in -0.02f64..0.02, a3 in -0.01f64..0.01
    ) {
        let base = circle([0.5, 0.5], 0.2, 64, true).unwrap();
        let c = perturbed(&base, |_, t| a2 * (2.0 * t).cos() + a3 * (3.0 * t).sin(), 64).unwrap();
        let t = c.translated([dx, dy]);
        prop_assert!((enclosed_area(&c).unwrap() - enclosed_area(&t).unwrap()).abs() < 1e-12);
        prop_assert!((perimeter(&c) - perimeter(&t)).abs() < 1e-12);
    }

    #[test]
    fn strip_area_tracks_offset(h in 0.05f64..0.9, off in 0.0f64..1.0) {
        let c = strip(h, off, StripAngle::Horizontal, 16).unwrap();
        prop_assert!((enclosed_area(&c).unwrap() - h).abs() < 1e-12);
    }
}
