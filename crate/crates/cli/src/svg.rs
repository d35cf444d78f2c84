//! Static SVG plots. Every number is printed with fixed precision and nothing
//! time-dependent is written, so equal inputs give byte-identical files.

use std::fmt::Write as _;

use torusflow::geometry::PeriodicCurve;

use crate::error::{CliError, CliResult};

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    /// Vertical stems from zero with a dot at each value.
    Stem,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub style: Style,
    pub series: Vec<Series>,
    /// Lines of the leading metadata comment (config hashes and the like).
    pub metadata: Vec<String>,
}

fn header(out: &mut String, width: f64, height: f64, metadata: &[String]) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    for m in metadata {
        // `--` may not appear inside an XML comment
        let _ = writeln!(out, "<!-- {} -->", m.replace("--", "- -"));
    }
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>");
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick label: plain decimals in `[1e-3, 1e4)`, scientific otherwise.
pub fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

/// About `target` round-valued ticks covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= target as f64).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let w = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - w, hi + w)
    }
}

pub fn render(plot: &Plot) -> CliResult<String> {
    let transform = |y: f64| if plot.log_y { y.log10() } else { y };
    let series: Vec<(String, Vec<[f64; 2]>)> = plot
        .series
        .iter()
        .map(|s| {
            let pts = s
                .points
                .iter()
                .filter(|p| p[0].is_finite() && p[1].is_finite() && (!plot.log_y || p[1] > 0.0))
                .map(|p| [p[0], transform(p[1])])
                .collect();
            (s.label.clone(), pts)
        })
        .collect();
    let all: Vec<[f64; 2]> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    if all.is_empty() {
        return Err(CliError::Usage(format!("nothing to plot in \"{}\"", plot.title)));
    }
    let fold = |f: fn(&[f64; 2]) -> f64| {
        all.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (mut x0, mut x1) = padded(fold(|p| p[0]).0, fold(|p| p[0]).1);
    let (mut y0, mut y1) = fold(|p| p[1]);
    if plot.style == Style::Stem {
        y0 = y0.min(0.0);
        y1 = y1.max(0.0);
    }
    (y0, y1) = padded(y0, y1);
    if plot.style == Style::Stem {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    header(&mut out, W, H, &plot.metadata);
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", W / 2.0, escape(&plot.title));
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT:.1}\" y=\"{TOP:.1}\" width=\"{pw:.1}\" height=\"{ph:.1}\" fill=\"none\" stroke=\"black\"/>"
    );
    for t in nice_ticks(x0, x1, 6) {
        let x = sx(t);
        let _ = writeln!(out, "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>", TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(out, "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", TOP + ph + 19.0, format_tick(t));
    }
    let yticks = if plot.log_y {
        let (a, b) = (y0.ceil() as i64, y1.floor() as i64);
        let step = ((b - a) / 6 + 1).max(1);
        let mut v: Vec<f64> = (a..=b).step_by(step as usize).map(|e| e as f64).collect();
        if v.is_empty() {
            v = nice_ticks(y0, y1, 4);
        }
        v
    } else {
        nice_ticks(y0, y1, 6)
    };
    for t in yticks {
        let y = sy(t);
        let label = if plot.log_y {
            if t.fract() == 0.0 {
                format!("1e{}", t as i64)
            } else {
                format_tick(10f64.powf(t))
            }
        } else {
            format_tick(t)
        };
        let _ = writeln!(out, "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>", LEFT - 5.0);
        let _ = writeln!(out, "<line x1=\"{LEFT:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>", LEFT + pw);
        let _ = writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>", LEFT - 8.0, y + 4.0);
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", LEFT + pw / 2.0, H - 14.0, escape(&plot.x_label));
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}{}</text>",
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label),
        if plot.log_y { " (log)" } else { "" }
    );
    if plot.style == Style::Stem && y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(out, "<line x1=\"{LEFT:.2}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"black\"/>", sy(0.0), LEFT + pw);
    }
    let n = series.len();
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, "<g id=\"series-{i}\" stroke=\"{color}\" fill=\"{color}\">");
        match plot.style {
            Style::Line => {
                let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1]))).collect();
                let _ = writeln!(out, "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"{}\"/>", path.join(" "));
            }
            Style::Stem => {
                // side-by-side stems when several series share an index
                let dx = if n > 1 { (i as f64 - 0.5 * (n - 1) as f64) * 0.6 / n as f64 } else { 0.0 };
                for p in pts {
                    let (x, y) = (sx(p[0] + dx), sy(p[1]));
                    let _ = writeln!(out, "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke-width=\"1.5\"/>", sy(0.0f64.clamp(y0, y1)));
                    let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\"/>");
                }
            }
        }
        let ly = TOP + 16.0 + 16.0 * i as f64;
        let lx = LEFT + pw - 170.0;
        let _ = writeln!(out, "<line x1=\"{lx:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke-width=\"2\"/>", ly - 4.0, lx + 20.0, ly - 4.0);
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{ly:.1}\" stroke=\"none\" fill=\"black\">{}</text>", lx + 26.0, escape(label));
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Curves drawn on the unit square with periodic wrap-around.
pub fn render_curves(title: &str, curves: &[(String, PeriodicCurve)], metadata: &[String]) -> CliResult<String> {
    if curves.is_empty() {
        return Err(CliError::Usage("no curves to plot".into()));
    }
    let side = 440.0;
    let (w, h) = (side + 220.0, side + 80.0);
    let (ox, oy) = (40.0, 50.0);
    let mut out = String::new();
    header(&mut out, w, h, metadata);
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"26\" text-anchor=\"middle\" font-size=\"15\">{}</text>", ox + side / 2.0, escape(title));
    let _ = writeln!(out, "<clipPath id=\"torus\"><rect x=\"{ox:.1}\" y=\"{oy:.1}\" width=\"{side:.1}\" height=\"{side:.1}\"/></clipPath>");
    let _ = writeln!(out, "<rect x=\"{ox:.1}\" y=\"{oy:.1}\" width=\"{side:.1}\" height=\"{side:.1}\" fill=\"none\" stroke=\"black\"/>");
    for (i, (label, c)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, "<g id=\"curve-{i}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\" clip-path=\"url(#torus)\">");
        for l in c.loops() {
            let mut pts = l.lifted();
            let w = l.winding();
            let p0 = pts[0];
            pts.push([p0[0] + w[0] as f64, p0[1] + w[1] as f64]);
            for sx in -1..=1 {
                for sy in -1..=1 {
                    let path: Vec<String> = pts
                        .iter()
                        .map(|p| format!("{:.2},{:.2}", ox + (p[0] + sx as f64) * side, oy + (1.0 - p[1] - sy as f64) * side))
                        .collect();
                    let _ = writeln!(out, "<polyline points=\"{}\"/>", path.join(" "));
                }
            }
        }
        out.push_str("</g>\n");
        let ly = oy + 14.0 + 18.0 * i as f64;
        let lx = ox + side + 16.0;
        let _ = writeln!(
            out,
            "<line x1=\"{lx:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            ly - 4.0,
            lx + 20.0,
            ly - 4.0
        );
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>", lx + 26.0, escape(label));
    }
    out.push_str("</svg>\n");
    Ok(out)
}
