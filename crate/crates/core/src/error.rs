use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("descent did not converge: {0}")]
    NonConverged(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("phase decomposition failed: {0}")]
    DecompositionFailed(String),
    #[error("no admissible y*: {0}")]
    YstarNotFound(String),
    #[error("amplitude bound violated: {0}")]
    AmplitudeViolation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
