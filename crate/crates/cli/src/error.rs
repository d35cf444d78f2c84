use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI invocation, each tied to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    /// A scenario problem, anchored at a line when the key came from a file.
    #[error("config error{}: {message}", location(.file, .line, .key))]
    Config { file: Option<PathBuf>, line: Option<usize>, key: Option<String>, message: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] torusflow::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn location(file: &Option<PathBuf>, line: &Option<usize>, key: &Option<String>) -> String {
    let mut s = String::new();
    match (file, line) {
        (Some(f), Some(l)) => s.push_str(&format!(" at {}:{l}", f.display())),
        (Some(f), None) => s.push_str(&format!(" in {}", f.display())),
        (None, Some(l)) => s.push_str(&format!(" at line {l}")),
        (None, None) => {}
    }
    if let Some(k) = key {
        s.push_str(&format!(" ({k})"));
    }
    s
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { file: None, line: None, key: Some(key.into()), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for usage and configuration problems, 3 for broken invariants.
    pub fn exit_code(&self) -> i32 {
        use torusflow::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Invariant(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::Parse { .. } | E::Io(_) | E::Orientation(_) | E::Topology(_) | E::Resolution(_) => 2,
                E::GraphFailure(_) => 1,
                E::Invariant(_) | E::Json(_) => 3,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
