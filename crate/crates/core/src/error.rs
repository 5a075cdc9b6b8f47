use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("network is disconnected: {}", format_components(.components))]
    Disconnected { components: Vec<Vec<String>> },

    #[error("estimation error: {0}")]
    Estimation(String),

    /// The congruent dataset cannot support the synthesis the strategy needs.
    #[error("NB not estimable for this threshold combination: {0}")]
    NotEstimable(String),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: Arc<std::io::Error>,
    },
}

fn format_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("{{{}}}", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source: Arc::new(source),
        }
    }

    /// Process exit code: 1 validation, 2 estimation, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Schema(_)
            | Error::Config(_)
            | Error::Argument(_)
            | Error::Disconnected { .. } => 1,
            Error::Estimation(_) | Error::NotEstimable(_) => 2,
            Error::Io { .. } => 3,
        }
    }

    /// Short machine-readable tag used in diagnostics output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Schema(_) => "schema",
            Error::Config(_) => "config",
            Error::Argument(_) => "argument",
            Error::Disconnected { .. } => "connectivity",
            Error::Estimation(_) => "estimation",
            Error::NotEstimable(_) => "not_estimable",
            Error::Io { .. } => "io",
        }
    }
}
