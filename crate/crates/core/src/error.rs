use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sensor height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("sensor efficiency must be positive, got {0}")]
    NonPositiveEfficiency(f64),
    #[error("source strength must be non-negative, got {0}")]
    NegativeStrength(f64),
    #[error("Poisson rate must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("Poisson mean must be positive, got {0}")]
    NonPositiveMean(f64),
    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
