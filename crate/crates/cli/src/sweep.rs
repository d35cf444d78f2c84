//! Cartesian sweeps over override values, one independent run per variant
//! on a worker pool. Variants with the same config hash run once.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{load_file, Loaded, Override};
use crate::error::{CliError, CliResult};
use crate::Command;

/// `key=v1,v2,…`; commas inside brackets or quotes do not split.
pub fn parse_vary(spec: &str) -> CliResult<(String, Vec<String>)> {
    let (key, list) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--vary `{spec}` is not of the form section.key=v1,v2")))?;
    let mut values = Vec::new();
    let (mut depth, mut quoted, mut cur) = (0i32, false, String::new());
    for ch in list.chars() {
        match ch {
            '"' => quoted = !quoted,
            '[' | '{' if !quoted => depth += 1,
            ']' | '}' if !quoted => depth -= 1,
            ',' if depth == 0 && !quoted => {
                values.push(std::mem::take(&mut cur).trim().to_string());
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    values.push(cur.trim().to_string());
    if values.iter().any(String::is_empty) {
        return Err(CliError::Usage(format!("--vary `{spec}` has an empty value")));
    }
    Ok((key.trim().to_string(), values))
}

/// Every combination of the varied values, in lexicographic order.
pub fn combinations(vary: &[(String, Vec<String>)]) -> Vec<Vec<String>> {
    vary.iter().fold(vec![Vec::new()], |acc, (key, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(format!("{key}={v}"));
                    next
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub overrides: Vec<String>,
    pub config_hash: String,
    pub exit_code: i32,
    pub summary: Option<PathBuf>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub sweep_hash: String,
    pub command: String,
    pub jobs: usize,
    pub exit_code: i32,
    pub entries: Vec<SweepEntry>,
}

pub fn sweep(scenario: &Path, base: &[Override], vary: &[String], command: Command, jobs: usize) -> CliResult<(SweepSummary, PathBuf)> {
    let vary = vary.iter().map(|v| parse_vary(v)).collect::<CliResult<Vec<_>>>()?;
    let mut variants: Vec<(Vec<String>, Loaded)> = Vec::new();
    for combo in combinations(&vary) {
        let mut ovs = base.to_vec();
        for c in &combo {
            ovs.push(Override::parse(c, "sweep")?);
        }
        let loaded = load_file(scenario, &ovs)?;
        if !variants.iter().any(|(_, l)| l.hash == loaded.hash) {
            variants.push((combo, loaded));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        variants
            .par_iter()
            .map(|(combo, loaded)| {
                let (exit_code, summary, error) = match crate::run_command(command, loaded) {
                    Ok(o) => (o.exit_code, Some(o.summary), o.message),
                    Err(e) => (e.exit_code(), None, Some(e.to_string())),
                };
                SweepEntry { overrides: combo.clone(), config_hash: loaded.hash.clone(), exit_code, summary, error }
            })
            .collect()
    });
    let mut h = Sha256::new();
    for e in &entries {
        h.update(e.config_hash.as_bytes());
    }
    h.update(command.name().as_bytes());
    let sweep_hash = hex::encode(h.finalize());
    let exit_code = entries.iter().map(|e| e.exit_code).max().unwrap_or(0);
    let summary = SweepSummary { sweep_hash: sweep_hash.clone(), command: command.name().into(), jobs, exit_code, entries };
    let first = &variants.first().ok_or_else(|| CliError::Usage("sweep has no variants".into()))?.1;
    let dir = first.resolve(&first.scenario.output.dir);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join(format!("sweep-{}.json", &sweep_hash[..16]));
    let body = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Invariant(e.to_string()))?;
    std::fs::write(&path, body + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok((summary, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vary_lists_split_outside_brackets() {
        let (k, v) = parse_vary("geometry.center=[0.5, 0.5],[0.4,0.6]").unwrap();
        assert_eq!(k, "geometry.center");
        assert_eq!(v, vec!["[0.5, 0.5]", "[0.4,0.6]"]);
        assert!(parse_vary("flow.gamma").is_err());
        assert!(parse_vary("flow.gamma=1,,2").is_err());
    }

    #[test]
    fn combinations_are_a_cartesian_product() {
        let c = combinations(&[("a.x".into(), vec!["1".into(), "2".into()]), ("b.y".into(), vec!["p".into(), "q".into(), "r".into()])]);
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], vec!["a.x=1", "b.y=p"]);
        assert_eq!(c[5], vec!["a.x=2", "b.y=r"]);
        assert_eq!(combinations(&[]), vec![Vec::<String>::new()]);
    }
}
