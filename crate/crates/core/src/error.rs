use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by grid construction, operators, the solver and the CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid sphere quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("direction is not a unit vector (|w| = {norm})")]
    NonUnitVector { norm: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numerical blow-up at Picard iterate {iteration}: {detail}")]
    BlowUp { iteration: usize, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}", format_config_errors(.0))]
    Config(Vec<crate::cli::config::ConfigError>),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_config_errors(errors: &[crate::cli::config::ConfigError]) -> String {
    let lines: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
    format!("{} configuration error(s):\n  {}", errors.len(), lines.join("\n  "))
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
