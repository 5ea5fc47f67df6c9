use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid composition vector: {0}")]
    InvalidComposition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative weight {weight} at atom {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("measure has zero mass")]
    ZeroMass,

    #[error("kernel outside the uniqueness class: {0}")]
    OutsideClass(String),

    #[error("non-finite value in stage {stage} at t = {t}: {detail}")]
    NumericalAbort {
        stage: usize,
        t: f64,
        detail: String,
    },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
