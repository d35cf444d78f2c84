//! Command-line front end: scenario files in, traces, snapshots, JSON
//! summaries and SVG plots out, every file stamped with the config hash.

pub mod commands;
pub mod config;
pub mod defaults;
pub mod error;
pub mod plot;
pub mod shapes;
pub mod svg;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Outcome;
use crate::config::{env_overrides, load_file, Loaded, Override};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "torusflow", version, about = "Interface flows and stability on the flat torus")]
#[command(after_help = "Any scenario key can be overridden with --section.key=value \
(or TORUSFLOW_<SECTION>_<KEY> in the environment).\n\
Exit codes: 0 success, 1 stopping event, 2 usage or config error, 3 invariant violation.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, clap::Args)]
pub struct ScenarioArgs {
    /// Scenario TOML file.
    pub scenario: PathBuf,
    /// Override a key, `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the flow and fit the decay of the dissipation.
    Simulate(ScenarioArgs),
    /// Second-variation spectrum across the γ list.
    Stability(ScenarioArgs),
    /// Energy identities on a short run and at the initial curve.
    Verify(ScenarioArgs),
    /// Run one command over every combination of `--vary` values.
    Sweep {
        #[command(flatten)]
        args: ScenarioArgs,
        /// `section.key=v1,v2,…`; repeatable, combined as a product.
        #[arg(long, value_name = "KEY=VALUES")]
        vary: Vec<String>,
        #[arg(long, value_enum, default_value_t = Command::Simulate)]
        command: Command,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Plot traces, spectra or snapshots written by the other commands.
    Plot {
        #[arg(long, value_enum)]
        kind: plot::PlotKind,
        /// Output SVG.
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        title: Option<String>,
        /// Several inputs are overlaid.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Stability,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Stability => "stability",
            Command::Verify => "verify",
        }
    }
}

pub fn run_command(command: Command, loaded: &Loaded) -> CliResult<Outcome> {
    match command {
        Command::Simulate => commands::simulate(loaded),
        Command::Stability => commands::stability(loaded),
        Command::Verify => commands::verify(loaded),
    }
}

/// Split `--section.key=value` flags off the raw arguments so clap sees the
/// rest; returns `(clap arguments, override specs)`.
pub fn split_dotted(args: impl IntoIterator<Item = OsString>) -> (Vec<OsString>, Vec<String>) {
    let mut rest = Vec::new();
    let mut dotted = Vec::new();
    for a in args {
        match a.to_str().and_then(|s| s.strip_prefix("--")) {
            Some(s) if s.split_once('=').is_some_and(|(k, _)| k.contains('.')) => dotted.push(s.to_string()),
            _ => rest.push(a),
        }
    }
    (rest, dotted)
}

fn overrides(args: &ScenarioArgs, dotted: &[String], env: Vec<(String, String)>) -> CliResult<Vec<Override>> {
    let mut all = env_overrides(env)?;
    for s in &args.set {
        all.push(Override::parse(s, &format!("--set {s}"))?);
    }
    for s in dotted {
        all.push(Override::parse(s, &format!("--{s}"))?);
    }
    Ok(all)
}

/// Execute a parsed command line; `env` supplies the `TORUSFLOW_*` variables.
pub fn execute(cli: Cli, dotted: &[String], env: Vec<(String, String)>) -> CliResult<(Outcome, String)> {
    let single = |args: &ScenarioArgs, command: Command| -> CliResult<(Outcome, String)> {
        let loaded = load_file(&args.scenario, &overrides(args, dotted, env.clone())?)?;
        let o = run_command(command, &loaded)?;
        let line = format!("{}: {} (config_hash {})", command.name(), o.summary.display(), loaded.hash);
        Ok((o, line))
    };
    match &cli.command {
        Cmd::Simulate(a) => single(a, Command::Simulate),
        Cmd::Stability(a) => single(a, Command::Stability),
        Cmd::Verify(a) => single(a, Command::Verify),
        Cmd::Sweep { args, vary, command, jobs } => {
            if *jobs == 0 {
                return Err(CliError::Usage("--jobs must be at least 1".into()));
            }
            let ovs = overrides(args, dotted, env.clone())?;
            let (summary, path) = sweep::sweep(&args.scenario, &ovs, vary, *command, *jobs)?;
            let failed: Vec<String> =
                summary.entries.iter().filter(|e| e.exit_code != 0).map(|e| format!("{} → {}", e.overrides.join(" "), e.exit_code)).collect();
            let line = format!("sweep: {} (sweep_hash {}, {} runs)", path.display(), summary.sweep_hash, summary.entries.len());
            let message = (!failed.is_empty()).then(|| format!("non-zero runs: {}", failed.join("; ")));
            Ok((Outcome { exit_code: summary.exit_code, summary: path, message }, line))
        }
        Cmd::Plot { kind, output, title, inputs } => {
            if !dotted.is_empty() {
                return Err(CliError::Usage("plot takes no scenario overrides".into()));
            }
            plot::plot(*kind, inputs, output, title.as_deref())?;
            Ok((Outcome { exit_code: 0, summary: output.clone(), message: None }, format!("plot: {}", output.display())))
        }
    }
}
