use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid experiment configuration. `source_name` names the file (and the
    /// line, when the parser knows it) or the offending override.
    #[error("{source_name}: {message}")]
    Config {
        source_name: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    /// A file that does not follow the trace format.
    #[error("{}: {message}", path.display())]
    Trace { path: PathBuf, message: String },

    #[error("invalid glob pattern {pattern:?}: {message}")]
    Pattern { pattern: String, message: String },

    /// Traces of one group do not share a round grid.
    #[error("round grids differ within a group: {} vs {}: {detail}", first.display(), other.display())]
    Alignment {
        first: PathBuf,
        other: PathBuf,
        detail: String,
    },

    #[error("cannot start worker pool: {0}")]
    Pool(String),

    /// A verification subcommand found a quantity outside its tolerance.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Core(#[from] psro_core::Error),
}

impl HarnessError {
    /// Short stable name of the error class, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config { .. } => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Csv { .. } => "csv",
            HarnessError::Trace { .. } => "trace",
            HarnessError::Pattern { .. } => "pattern",
            HarnessError::Alignment { .. } => "alignment",
            HarnessError::Pool(_) => "pool",
            HarnessError::Verification(_) => "verification",
            HarnessError::Core(_) => "core",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Csv { path, source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
