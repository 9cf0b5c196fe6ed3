//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data fails a structural precondition (degenerate boundary,
    /// negative counts, shares not summing to one, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is out of range or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Population raster does not overlap the zone grid at all.
    #[error("no population coverage: raster does not overlap the zone grid")]
    NoPopulationCoverage,

    /// Gravity model cannot run because every destination has zero weight.
    #[error("no destinations: all zone attractiveness values are zero")]
    NoDestinations,

    /// A routing provider failed (too many failures, unreachable, bad reply).
    #[error("routing error: {0}")]
    Routing(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
