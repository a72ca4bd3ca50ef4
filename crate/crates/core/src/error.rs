use thiserror::Error;

/// Errors raised by the catastrophe toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} must be positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },

    #[error("{field} must be finite (got {value})")]
    NonFinite { field: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {len} states")]
    OutOfRange { index: usize, len: usize },

    #[error("truncation certificate exp({log_bound:.3}) exceeds tolerance {tol:e} with {n_states} states at t={t}")]
    Truncation {
        t: f64,
        n_states: usize,
        log_bound: f64,
        tol: f64,
    },

    #[error("catastrophe product {x}*{y} exceeds the representable draw range")]
    ProductOverflow { x: u64, y: u64 },

    #[error("scaling is pre-asymptotic at T={t}: phi(T)={phi} must exceed T")]
    PreAsymptotic { t: f64, phi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
