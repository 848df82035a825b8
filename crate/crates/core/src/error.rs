use thiserror::Error;

pub type Result<T> = std::result::Result<T, SabrError>;

#[derive(Debug, Error)]
pub enum SabrError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("price {price} outside the open interval ({lower}, {upper})")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },

    #[error("implied volatility solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("Hagan approximation produced a non-positive volatility ({0})")]
    NegativeVol(f64),

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch}: validation loss is not finite")]
    Diverged { epoch: usize },

    #[error("reference values have (near) zero variance")]
    DegenerateReference,

    #[error("region {0} has no rows")]
    EmptyRegion(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SabrError {
    /// True for failures caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SabrError::PriceOutOfBounds { .. }
                | SabrError::NoConvergence { .. }
                | SabrError::DomainError(_)
                | SabrError::NegativeVol(_)
                | SabrError::NonFinite(_)
                | SabrError::Diverged { .. }
                | SabrError::DegenerateReference
        )
    }
}
