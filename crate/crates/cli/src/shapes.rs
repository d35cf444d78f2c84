//! Turning a geometry spec into a marker curve.

use std::fs::File;

use torusflow::geometry::shapes::{circle, ellipse, lamella_k, perturbed, perturbed_lamella, strip, StripAngle};
use torusflow::geometry::{min_image2, PeriodicCurve};
use torusflow::io::read_snapshot;

use crate::config::{GeometrySpec, Loaded, Shape};
use crate::defaults as d;
use crate::error::{CliError, CliResult};

/// The initial curve and the unperturbed reference it was built from (the
/// curve itself unless the shape is `perturbed`).
pub struct Initial {
    pub curve: PeriodicCurve,
    pub base: PeriodicCurve,
}

pub fn build(loaded: &Loaded) -> CliResult<Initial> {
    let g = &loaded.scenario.geometry;
    let n = loaded.scenario.grid.markers;
    if g.shape != Shape::Perturbed {
        let c = build_plain(g, n, loaded)?;
        return Ok(Initial { curve: c.clone(), base: c });
    }
    let spec = g.base.as_deref().expect("validated: perturbed has a base");
    let base = build_plain(spec, n, loaded)?;
    let mode = g.mode.expect("validated: perturbed has a mode");
    let amps: Vec<f64> = match (&g.amplitudes, g.amplitude) {
        (Some(v), _) => v.clone(),
        (None, Some(a)) => vec![a; base.loops().len()],
        (None, None) => unreachable!("validated: perturbed has an amplitude"),
    };
    if amps.len() != base.loops().len() {
        return Err(CliError::config(
            "geometry.amplitudes",
            format!("{} amplitudes for {} loops", amps.len(), base.loops().len()),
        ));
    }
    let horizontal = matches!(spec.shape, Shape::Lamella)
        || (spec.shape == Shape::Strip && StripAngle::from_degrees(spec.angle.unwrap_or(d::STRIP_ANGLE))? == StripAngle::Horizontal);
    let curve = if horizontal {
        // y_l + ε_l sin(2πk x): equal amplitudes move all interfaces alike
        perturbed_lamella(&base, mode, &amps, n)?
    } else {
        // ε_l cos(kα) along the outer normal
        perturbed(&base, |l, a| amps[l] * (f64::from(mode) * a).cos(), n)?
    };
    Ok(Initial { curve, base })
}

fn build_plain(g: &GeometrySpec, n: usize, loaded: &Loaded) -> CliResult<PeriodicCurve> {
    let center = g.center.unwrap_or(d::CENTER);
    let inside = g.phase_inside.unwrap_or(d::PHASE_INSIDE);
    let offset = g.offset.unwrap_or(d::STRIP_OFFSET);
    Ok(match g.shape {
        Shape::Circle => circle(center, g.r.unwrap_or_default(), n, inside)?,
        Shape::Ellipse => ellipse(center, g.a.unwrap_or_default(), g.b.unwrap_or_default(), n, inside)?,
        Shape::Strip => strip(g.h.unwrap_or_default(), offset, StripAngle::from_degrees(g.angle.unwrap_or(d::STRIP_ANGLE))?, n)?,
        Shape::Lamella => lamella_k(g.k.unwrap_or(1), g.h.unwrap_or(d::LAMELLA_H), offset, n)?,
        Shape::Snapshot => {
            let p = loaded.resolve(g.path.as_deref().expect("validated: snapshot has a path"));
            let f = File::open(&p).map_err(|e| CliError::io(&p, e))?;
            read_snapshot(f).map_err(|e| match e {
                torusflow::Error::Parse { line, message } => {
                    CliError::Config { file: Some(p.clone()), line: Some(line), key: None, message }
                }
                other => other.into(),
            })?
        }
        Shape::Perturbed => unreachable!("validated: bases are not perturbed"),
    })
}

/// Mean shift between matching loops of two curves with the same layout.
pub fn mean_shift(from: &PeriodicCurve, to: &PeriodicCurve) -> [f64; 2] {
    let centroid = |pts: Vec<[f64; 2]>| {
        let m = pts.len() as f64;
        [pts.iter().map(|p| p[0]).sum::<f64>() / m, pts.iter().map(|p| p[1]).sum::<f64>() / m]
    };
    let pairs: Vec<[f64; 2]> = from
        .loops()
        .iter()
        .zip(to.loops())
        .map(|(a, b)| {
            let (ca, cb) = (centroid(a.lifted()), centroid(b.lifted()));
            min_image2([cb[0] - ca[0], cb[1] - ca[1]])
        })
        .collect();
    let m = pairs.len().max(1) as f64;
    [pairs.iter().map(|p| p[0]).sum::<f64>() / m, pairs.iter().map(|p| p[1]).sum::<f64>() / m]
}
