//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label out of range: {0}")]
    Label(i64),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("model bundle version mismatch: found {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("model bundle checksum mismatch")]
    Checksum,

    #[error("wire frame error: {0}")]
    Wire(String),

    #[error("clock resolution insufficient: {zero_fraction:.1}% of samples measured 0")]
    ClockResolution { zero_fraction: f64 },

    #[error("csv parse error at line {line}: {message}")]
    CsvFormat { line: u64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
