use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("unsupported operand: {0}")]
    Unsupported(String),
    #[error("pole hit: |p2 - z| = {distance:e}")]
    Pole { distance: f64 },
    #[error("insufficient derivative order: need k <= {required}, supplied {supplied}")]
    DerivativeOrder { required: usize, supplied: usize },
    #[error("internal consistency: {0}")]
    Consistency(String),
    #[error("conditioning: pivot {pivot:e} at row {row}, z is within ~{distance:e} of the spectrum")]
    Conditioning { row: usize, pivot: f64, distance: f64 },
    #[error("quadrature did not converge: achieved {achieved:e}, wanted {wanted:e}")]
    Quadrature { achieved: f64, wanted: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
