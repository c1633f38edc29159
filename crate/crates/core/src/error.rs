use thiserror::Error;

/// Errors raised while building or analysing a market.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("{field}: expected length {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: usize,
        found: usize,
    },

    #[error("{field}: value {value} is not finite")]
    NonFinite { field: String, value: f64 },

    #[error("sigma must have at least one row and one column")]
    Empty,

    #[error("Brownian dimension {dim} exceeds the number of securities {assets}")]
    TooManyFactors { dim: usize, assets: usize },

    #[error("sigma is rank deficient (smallest singular value {min_singular:e}, largest {max_singular:e}); the market is incomplete")]
    RankDeficient {
        min_singular: f64,
        max_singular: f64,
    },

    #[error(
        "market is not viable: least-squares residual {residual:e} exceeds tolerance {tolerance:e}"
    )]
    NotViable { residual: f64, tolerance: f64 },
}

/// Errors raised by the simulation, strategy and horizon layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("segment boundary at t={time} is not on the simulation grid (dt={dt})")]
    Misaligned { time: f64, dt: f64 },

    #[error("market and bundle disagree: {0}")]
    Mismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Market(#[from] MarketError),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
