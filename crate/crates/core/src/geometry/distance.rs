use std::f64::consts::PI;

use super::{cross, dot, min_image2, CurveSamples, PeriodicCurve, SampleKind};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::par;

struct Segment {
    a: [f64; 2],
    e: [f64; 2],
    loop_id: usize,
    idx: usize,
}

fn segments(curve: &PeriodicCurve) -> Vec<Segment> {
    let mut out = Vec::with_capacity(curve.n_markers());
    for (li, f) in curve.frames().iter().enumerate() {
        let n = f.lifted.len();
        for j in 0..n {
            let a = f.lifted[j];
            let b = f.lifted[(j + 1) % n];
            let e = min_image2([b[0] - a[0], b[1] - a[1]]);
            out.push(Segment { a, e, loop_id: li, idx: j });
        }
    }
    out
}

fn proper_intersect(p: [f64; 2], r: [f64; 2], q: [f64; 2], s: [f64; 2]) -> bool {
    let rxs = cross(r, s);
    let qp = [q[0] - p[0], q[1] - p[1]];
    if rxs.abs() < 1e-300 {
        // parallel: treat collinear overlap as an intersection
        if cross(qp, r).abs() > 1e-15 {
            return false;
        }
        let rr = dot(r, r);
        let t0 = dot(qp, r) / rr;
        let t1 = t0 + dot(s, r) / rr;
        let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        return hi > 1e-12 && lo < 1.0 - 1e-12;
    }
    let t = cross(qp, s) / rxs;
    let u = cross(qp, r) / rxs;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
}

/// First pair of crossing polygon segments, as `(loop, segment)` indices.
pub fn self_intersection(curve: &PeriodicCurve) -> Option<((usize, usize), (usize, usize))> {
    let segs = segments(curve);
    let sizes: Vec<usize> = curve.loops().iter().map(|l| l.len()).collect();
    let hits = par::map_indexed(segs.len(), |i| {
        let si = &segs[i];
        let mi = [si.a[0] + 0.5 * si.e[0], si.a[1] + 0.5 * si.e[1]];
        let li = si.e[0].hypot(si.e[1]);
        for sj in segs.iter().skip(i + 1) {
            if sj.loop_id == si.loop_id {
                let n = sizes[si.loop_id];
                let d = (sj.idx + n - si.idx) % n;
                if d <= 1 || d == n - 1 {
                    continue;
                }
            }
            let mj = [sj.a[0] + 0.5 * sj.e[0], sj.a[1] + 0.5 * sj.e[1]];
            let dm = min_image2([mj[0] - mi[0], mj[1] - mi[1]]);
            let lj = sj.e[0].hypot(sj.e[1]);
            if dm[0].hypot(dm[1]) > 0.5 * (li + lj) + 1e-15 {
                continue;
            }
            let q = [mi[0] + dm[0] - 0.5 * sj.e[0], mi[1] + dm[1] - 0.5 * sj.e[1]];
            if proper_intersect(si.a, si.e, q, sj.e) {
                return Some(((si.loop_id, si.idx), (sj.loop_id, sj.idx)));
            }
        }
        None
    });
    hits.into_iter().flatten().next()
}

/// Signed torus distance to the polygon `∂E` at every node `(i/n, j/n)`,
/// negative inside `E`. Row `j` holds `y = j/n`.
pub fn signed_distance_grid(curve: &PeriodicCurve, grid_n: usize) -> Result<GridField> {
    if grid_n < 64 {
        return Err(Error::Resolution(format!("grid_n = {grid_n} < 64")));
    }
    let segs = segments(curve);
    let normals = curve.normals();
    let offsets = curve.offsets();
    let orient: Vec<f64> = curve.loops().iter().map(|l| l.orientation() as f64).collect();
    let mut values = vec![0.0; grid_n * grid_n];
    par::fill_chunks(&mut values, grid_n, |row, out| {
        let y = row as f64 / grid_n as f64;
        for (col, v) in out.iter_mut().enumerate() {
            let p = [col as f64 / grid_n as f64, y];
            *v = signed_distance_point(p, &segs, &normals, &offsets, &orient);
        }
    });
    Ok(GridField::new(grid_n, values, false))
}

fn signed_distance_point(
    p: [f64; 2],
    segs: &[Segment],
    normals: &[[f64; 2]],
    offsets: &[usize],
    orient: &[f64],
) -> f64 {
    let mut best = f64::INFINITY;
    let mut sign = 1.0;
    for s in segs {
        let da = min_image2([p[0] - s.a[0], p[1] - s.a[1]]);
        let ee = dot(s.e, s.e);
        let t = (dot(da, s.e) / ee).clamp(0.0, 1.0);
        let r = [da[0] - t * s.e[0], da[1] - t * s.e[1]];
        let d2 = dot(r, r);
        if d2 < best {
            best = d2;
            let nu = if t <= 0.0 {
                normals[offsets[s.loop_id] + s.idx]
            } else if t >= 1.0 {
                let n = offsets[s.loop_id + 1] - offsets[s.loop_id];
                normals[offsets[s.loop_id] + (s.idx + 1) % n]
            } else {
                let o = orient[s.loop_id];
                [o * s.e[1], -o * s.e[0]]
            };
            sign = if dot(r, nu) < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign * best.sqrt()
}

/// Half the distance from the reference to its other components (periodic
/// images of a loop that are not the same strand count as other components),
/// capped by `0.45 / max|κ|`.
pub fn tubular_radius(reference: &PeriodicCurve) -> f64 {
    let frames = reference.frames();
    let loops = reference.loops();
    let mut dmin = f64::INFINITY;
    for (li, fi) in frames.iter().enumerate() {
        for (lj, fj) in frames.iter().enumerate() {
            let w = loops[lj].winding();
            for x in &fi.lifted {
                for y in &fj.lifted {
                    let lifted = [y[0] - x[0], y[1] - x[1]];
                    let m = min_image2(lifted);
                    if li == lj {
                        let shift = [(lifted[0] - m[0]).round() as i64, (lifted[1] - m[1]).round() as i64];
                        if is_multiple(shift, w) {
                            continue;
                        }
                    }
                    dmin = dmin.min(m[0].hypot(m[1]));
                }
            }
        }
    }
    let kmax = reference.kappa().iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let cap = if kmax > 0.0 { 0.45 / kmax } else { f64::INFINITY };
    (0.5 * dmin).min(cap)
}

fn is_multiple(s: [i64; 2], w: [i32; 2]) -> bool {
    let w = [w[0] as i64, w[1] as i64];
    if s == [0, 0] {
        return true;
    }
    if w == [0, 0] {
        return false;
    }
    // s = m w for integer m
    s[0] * w[1] == s[1] * w[0] && {
        let m = if w[0] != 0 { s[0] / w[0] } else { s[1] / w[1] };
        m * w[0] == s[0] && m * w[1] == s[1]
    }
}

/// Normal height `ψ` of `curve` over `reference`, sampled at reference markers.
pub fn height_function(curve: &PeriodicCurve, reference: &PeriodicCurve) -> Result<CurveSamples> {
    let tub = tubular_radius(reference);
    height_function_within(curve, reference, tub)
}

pub(crate) fn height_function_within(
    curve: &PeriodicCurve,
    reference: &PeriodicCurve,
    tub: f64,
) -> Result<CurveSamples> {
    let base = reference.lifted_points();
    let normals = reference.normals();
    let interps: Vec<_> = curve.loops().iter().map(|l| l.interpolant()).collect();
    let frames = curve.frames();
    let spacing = frames
        .iter()
        .flat_map(|f| f.weights.iter().copied())
        .fold(0.0f64, f64::max);
    let results = par::map_indexed(base.len(), |i| {
        let x = base[i];
        let nu = normals[i];
        let mut roots: Vec<f64> = Vec::new();
        for (f, ip) in frames.iter().zip(&interps) {
            let n = f.lifted.len();
            let h = 2.0 * PI / n as f64;
            for j in 0..n {
                let xj = f.lifted[j];
                let dj = min_image2([xj[0] - x[0], xj[1] - x[1]]);
                if dj[0].hypot(dj[1]) > tub + 2.0 * spacing {
                    continue;
                }
                // lifted displacement relative to the marker's image near x; the
                // lattice part is rounded so neighbouring intervals agree exactly
                let lat = [(dj[0] - xj[0] + x[0]).round(), (dj[1] - xj[1] + x[1]).round()];
                let shift = [lat[0] - x[0], lat[1] - x[1]];
                let disp = |a: f64| {
                    let p = ip.point(a);
                    [p[0] + shift[0], p[1] + shift[1]]
                };
                let g = |a: f64| cross(disp(a), nu);
                let (a0, a1) = (j as f64 * h, (j + 1) as f64 * h);
                let (g0, g1) = (g(a0), g(a1));
                // a root on a marker is taken from the interval it starts
                if g0.abs() <= 1e-13 {
                    roots.push(dot(disp(a0), nu));
                } else if g1.abs() > 1e-13 && g0 * g1 < 0.0 {
                    let a = bisect(&g, a0, a1, g0);
                    roots.push(dot(disp(a), nu));
                }
            }
        }
        roots.retain(|r| r.abs() < tub);
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
        roots
    });
    let mut psi = Vec::with_capacity(base.len());
    for (i, r) in results.into_iter().enumerate() {
        if r.len() != 1 {
            return Err(Error::GraphFailure(format!(
                "reference marker {i}: {} intersections within tubular radius {tub:.4}",
                r.len()
            )));
        }
        psi.push(r[0]);
    }
    Ok(CurveSamples::new(SampleKind::Height, psi))
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut glo: f64) -> f64 {
    // Illinois variant of regula falsi; converges superlinearly on smooth g
    let mut ghi = g(hi);
    let mut side = 0;
    for _ in 0..100 {
        let m = (lo * ghi - hi * glo) / (ghi - glo);
        let gm = g(m);
        if gm == 0.0 || (hi - lo).abs() < 1e-15 {
            return m;
        }
        if gm * ghi < 0.0 {
            lo = hi;
            glo = ghi;
            hi = m;
            ghi = gm;
            side = 0;
        } else {
            hi = m;
            ghi = gm;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
        if (hi - lo).abs() < 1e-14 {
            return hi;
        }
    }
    0.5 * (lo + hi)
}
