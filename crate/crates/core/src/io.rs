//! Marker snapshots as CSV: `loop,idx,x,y,wind_x,wind_y,orient`, one row per
//! marker, coordinates reduced to `[0,1)²` and written with 17 significant
//! digits so that a read-back reproduces the curve bit for bit. Lines starting
//! with `#` are comments (metadata such as a config hash).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::{MarkerLoop, PeriodicCurve};

pub const SNAPSHOT_HEADER: [&str; 7] = ["loop", "idx", "x", "y", "wind_x", "wind_y", "orient"];

pub fn write_snapshot(curve: &PeriodicCurve, w: impl Write) -> Result<()> {
    write_snapshot_with_comment(curve, None, w)
}

/// As [`write_snapshot`], preceded by one `# comment` line when given.
pub fn write_snapshot_with_comment(curve: &PeriodicCurve, comment: Option<&str>, mut w: impl Write) -> Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SNAPSHOT_HEADER).map_err(csv_err)?;
    for (li, l) in curve.loops().iter().enumerate() {
        let [wx, wy] = l.winding();
        for (j, m) in l.markers().iter().enumerate() {
            out.write_record([
                li.to_string(),
                j.to_string(),
                format!("{:.16e}", m[0]),
                format!("{:.16e}", m[1]),
                wx.to_string(),
                wy.to_string(),
                l.orientation().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(r: impl Read) -> Result<PeriodicCurve> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != SNAPSHOT_HEADER {
        let line = header.position().map_or(1, |p| p.line() as usize);
        return Err(Error::Parse { line, message: format!("expected header {}", SNAPSHOT_HEADER.join(",")) });
    }
    let mut loops: Vec<(Vec<[f64; 2]>, [i32; 2], i8)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse { line, message: "missing field".into() });
        let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
        let li: usize = field(0)?.parse().map_err(|_| bad("loop index"))?;
        let idx: usize = field(1)?.parse().map_err(|_| bad("marker index"))?;
        let x: f64 = field(2)?.parse().map_err(|_| bad("x"))?;
        let y: f64 = field(3)?.parse().map_err(|_| bad("y"))?;
        let wind = [field(4)?.parse().map_err(|_| bad("wind_x"))?, field(5)?.parse().map_err(|_| bad("wind_y"))?];
        let orient: i8 = field(6)?.parse().map_err(|_| bad("orientation"))?;
        if li == loops.len() {
            loops.push((Vec::new(), wind, orient));
        } else if li + 1 != loops.len() {
            return Err(Error::Parse { line, message: format!("loop {li} out of order") });
        }
        let entry = loops.last_mut().expect("loop pushed above");
        if entry.1 != wind || entry.2 != orient {
            return Err(Error::Parse { line, message: "winding or orientation changes within a loop".into() });
        }
        if idx != entry.0.len() {
            return Err(Error::Parse { line, message: format!("marker {idx} out of order") });
        }
        entry.0.push([x, y]);
    }
    if loops.is_empty() {
        return Err(Error::Parse { line: 2, message: "no markers".into() });
    }
    let loops = loops.into_iter().map(|(m, w, o)| MarkerLoop::new(m, w, o)).collect::<Result<Vec<_>>>()?;
    PeriodicCurve::new(loops)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}
