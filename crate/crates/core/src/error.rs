use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("term {0} lies outside the hull of the positive terms; the relaxation is unbounded below")]
    UnboundedRelaxation(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("too many variables for orthant enumeration: {0} > {max}", max = crate::orthants::MAX_ORTHANT_VARS)]
    TooManyVariables(usize),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
