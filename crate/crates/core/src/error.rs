use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: truncation needs at least 2 levels")]
    InvalidDimension { dim: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("quadrature did not converge: achieved error estimate {estimate:e}, requested {requested:e}")]
    Quadrature { estimate: f64, requested: f64 },

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("truncation too small: {0}")]
    Truncation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
