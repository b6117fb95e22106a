use thiserror::Error;

/// Errors raised by the simulation library.
///
/// `Tangency` and `Corner` mark hits on the measure-zero singular set of the
/// billiard map. Samplers treat them as "resample", not as failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("tangential collision at r = {r}")]
    Tangency { r: f64 },

    #[error("trajectory hit a boundary junction at r = {r}")]
    Corner { r: f64 },

    #[error("ray escaped the table from r = {r}, phi = {phi}")]
    Escaped { r: f64, phi: f64 },

    #[error("return time exceeded the iteration cap of {cap} steps")]
    IterationCap { cap: u64 },

    #[error("operation not supported for this table: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// True for errors caused by hitting the singular set (tangency or corner).
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            Error::Tangency { .. } | Error::Corner { .. } | Error::Escaped { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
