use thiserror::Error;

use qbstab_sdp::{SdpError, SdpStatus};

#[derive(Debug, Error)]
pub enum QbError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("x_e is not an equilibrium: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotEquilibrium { residual: f64, tol: f64 },

    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("operation requires a synthesis certificate")]
    NotSynthesis,

    #[error("solver returned {status:?} at epsilon = {epsilon}")]
    Solver { epsilon: f64, status: SdpStatus },

    #[error("infeasible over the whole epsilon range ({} points scanned)", .evaluated.len())]
    AllInfeasible { evaluated: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Sdp(#[from] SdpError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QbError>;
