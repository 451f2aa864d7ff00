use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. The CLI maps each kind onto an exit code.
#[derive(Debug, Error)]
pub enum GkError {
    #[error("{}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    /// Two inputs share no variant.
    #[error("no overlap: {0}")]
    NoOverlap(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("degenerate variant: {0}")]
    DegenerateVariant(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("config error: unknown or malformed key `{key}`: {reason}")]
    Config { key: String, reason: String },
}

impl GkError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GkError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GkError::Solver(_) | GkError::Numerical(_) | GkError::Fit(_) | GkError::Estimation(_)
        )
    }
}

pub type Result<T, E = GkError> = std::result::Result<T, E>;
