use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("session format error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("session format error on line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("empty session: {0}")]
    EmptySession(String),

    #[error("degenerate timestep: samples {index} and {next} share a timestamp")]
    DegenerateTimestep { index: usize, next: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("infeasible protocol: {0}")]
    InfeasibleProtocol(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the caller.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn { .. }
                | Error::Row { .. }
                | Error::EmptySession(_)
                | Error::DegenerateTimestep { .. }
                | Error::Alignment(_)
                | Error::UndefinedMetric(_)
                | Error::InfeasibleProtocol(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
