use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("coefficient matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}
