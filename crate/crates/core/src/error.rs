use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no usable stream: every channel gain is zero")]
    NoUsableStream,

    #[error("degenerate combiner: noise covariance is singular")]
    DegenerateCombiner,

    #[error("degenerate precoder: analog-projected precoder has zero power")]
    DegeneratePrecoder,

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("missing path metadata: {0}")]
    MissingPaths(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code written into failure rows.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NoUsableStream => "no_usable_stream",
            Error::DegenerateCombiner => "degenerate_combiner",
            Error::DegeneratePrecoder => "degenerate_precoder",
            Error::ConstraintViolation(_) => "constraint_violation",
            Error::MissingPaths(_) => "missing_paths",
            Error::Decomposition(_) => "decomposition_failed",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}
