use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants split into two families: configuration problems (bad
/// parameters, empty admissible classes, malformed files) and numerical
/// failures (eigensolver residuals, modal truncation). [`Error::is_config`]
/// tells them apart, which is what the CLI uses to pick an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("empty admissible class: surface bound S = {s} must exceed a0*ell = {floor}")]
    EmptyClass { s: f64, floor: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigenpair {index} did not converge (relative residual {residual:e})")]
    EigenNonConvergence { index: usize, residual: f64 },

    #[error("modal truncation failure: {0}")]
    Truncation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_config(&self) -> bool {
        !matches!(
            self,
            Error::EigenNonConvergence { .. } | Error::Truncation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
