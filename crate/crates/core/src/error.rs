use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("empty execution protocol")]
    EmptyProtocol,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid column index {0:?}")]
    InvalidIndex(Vec<usize>),

    #[error("too many columns to enumerate (limit {limit})")]
    TooManyColumns { limit: usize },

    #[error("quantity unavailable: {0}")]
    Unavailable(&'static str),

    #[error("ellipsoid shape matrix ill-conditioned at step {step} (ratio {ratio:e})")]
    IllConditioned { step: usize, ratio: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
