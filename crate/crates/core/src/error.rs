use thiserror::Error;

/// Errors produced by the certification library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("invalid feasible set: {0}")]
    InvalidSet(String),
    #[error("unknown example id `{0}`")]
    UnknownExample(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid quotient scheme: {0}")]
    InvalidScheme(String),
    #[error("grid too large: {0}")]
    GridTooLarge(String),
    #[error("unbounded set: {0}")]
    Unbounded(String),
    #[error("kink proximity: {0}")]
    KinkProximity(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("malformed instance file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
