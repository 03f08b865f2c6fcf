//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the simulation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical or numerical argument is outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// An index (subcarrier, antenna, grid cell) is out of range.
    #[error("index error: {0}")]
    Index(String),
    /// A hardware or scenario configuration violates a constraint.
    #[error("configuration error: {0}")]
    Config(String),
    /// A trajectory specification cannot be fitted reliably.
    #[error("ill-conditioned trajectory: {0}")]
    IllConditioned(String),
    /// A radius/range calibration sweep is not monotone.
    #[error("calibration error: {0}")]
    Calibration(String),
    /// The wavenumber support reaches the spectrum border.
    #[error("aliasing: {0}")]
    Aliasing(String),
    /// A measured radius falls outside the calibrated table.
    #[error("out of calibration: {0}")]
    OutOfCalibration(String),
    /// The resource allocation problem has no feasible point.
    #[error("infeasible allocation: {0}")]
    Infeasible(String),
    /// No echo energy was observed.
    #[error("no detection: {0}")]
    NoDetection(String),
    /// File-system or serialization failure.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Result alias for the crate.
pub type Result<T> = std::result::Result<T, Error>;
