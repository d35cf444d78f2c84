//! `plot`: redraw outputs of earlier runs, overlaying several inputs. The
//! metadata comment lists the config hash of every input.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use torusflow::io::read_snapshot;

use crate::commands::{dissipation_plot, read_trace};
use crate::error::{CliError, CliResult};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Dissipation against time, log scale; trace CSV inputs.
    Dissipation,
    /// Eigenvalue stems; `stability.json` inputs.
    Spectrum,
    /// Interface overlay; snapshot CSV inputs.
    Curve,
}

/// Series label: the run directory when the file sits in one.
fn label(p: &Path) -> String {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match p.parent().and_then(|d| d.file_name()) {
        Some(d) => format!("{}/{stem}", d.to_string_lossy()),
        None => stem,
    }
}

fn hashes_from_comments(comments: &[String]) -> Vec<String> {
    comments.iter().filter(|c| c.starts_with("config_hash=")).cloned().collect()
}

fn push_unique(meta: &mut Vec<String>, items: Vec<String>) {
    for i in items {
        if !meta.contains(&i) {
            meta.push(i);
        }
    }
}

fn leading_comments(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.lines().take_while(|l| l.starts_with('#')).map(|l| l[1..].trim().to_string()).collect())
}

pub fn plot(kind: PlotKind, inputs: &[PathBuf], output: &Path, title: Option<&str>) -> CliResult<()> {
    let mut meta = Vec::new();
    let body = match kind {
        PlotKind::Dissipation => {
            let mut traces = Vec::new();
            for p in inputs {
                let (t, comments) = read_trace(p)?;
                if t.records.is_empty() {
                    return Err(CliError::Usage(format!("trace {} is empty", p.display())));
                }
                push_unique(&mut meta, hashes_from_comments(&comments));
                traces.push((label(p), t));
            }
            let refs: Vec<(String, &_)> = traces.iter().map(|(l, t)| (l.clone(), t)).collect();
            let mut plot = dissipation_plot(&refs, meta);
            if let Some(t) = title {
                plot.title = t.into();
            }
            svg::render(&plot)?
        }
        PlotKind::Spectrum => {
            let mut series = Vec::new();
            for p in inputs {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Config {
                    file: Some(p.clone()),
                    line: Some(e.line()),
                    key: None,
                    message: e.to_string(),
                })?;
                if let Some(h) = v.get("config_hash").and_then(|h| h.as_str()) {
                    push_unique(&mut meta, vec![format!("config_hash={h}")]);
                }
                let reports = v.get("reports").and_then(|r| r.as_array()).ok_or_else(|| CliError::Config {
                    file: Some(p.clone()),
                    line: None,
                    key: Some("reports".into()),
                    message: "not a stability summary".into(),
                })?;
                for r in reports {
                    let gamma = r.get("gamma").and_then(|g| g.as_f64()).unwrap_or(f64::NAN);
                    let ev: Vec<f64> = r
                        .pointer("/spectrum/eigenvalues")
                        .and_then(|e| e.as_array())
                        .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                        .unwrap_or_default();
                    series.push(svg::Series {
                        label: format!("{} γ = {}", label(p), svg::format_tick(gamma)),
                        points: ev.iter().enumerate().map(|(i, v)| [i as f64, *v]).collect(),
                    });
                }
            }
            svg::render(&svg::Plot {
                title: title.unwrap_or("second-variation spectrum").into(),
                x_label: "index".into(),
                y_label: "eigenvalue".into(),
                log_y: false,
                style: svg::Style::Stem,
                series,
                metadata: meta,
            })?
        }
        PlotKind::Curve => {
            let mut curves = Vec::new();
            for p in inputs {
                push_unique(&mut meta, hashes_from_comments(&leading_comments(p)?));
                let f = File::open(p).map_err(|e| CliError::io(p, e))?;
                let c = read_snapshot(f).map_err(|e| match e {
                    torusflow::Error::Parse { line, message } => {
                        CliError::Config { file: Some(p.clone()), line: Some(line), key: None, message }
                    }
                    other => other.into(),
                })?;
                curves.push((label(p), c));
            }
            svg::render_curves(title.unwrap_or("interface"), &curves, &meta)?
        }
    };
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(output, body).map_err(|e| CliError::io(output, e))
}
