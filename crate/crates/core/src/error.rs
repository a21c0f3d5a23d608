//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range (non-positive
    /// concentration, weight sum mismatch, bad configuration, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A data point is outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A weighted sample carries too little mass to estimate from.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// An iterative solver exhausted its budget.
    #[error("no convergence after {max_iter} iterations ({context})")]
    NonConvergence { context: String, max_iter: usize },

    /// Every candidate run of a multi-start fit was discarded.
    #[error("all runs discarded: {0}")]
    AllRunsDiscarded(String),

    /// A labeled class is too small to fit.
    #[error("class {label:?} has {n} points, fewer than the required {min}")]
    InsufficientClassSize { label: String, n: usize, min: usize },

    /// A truth label does not belong to the evaluated label set.
    #[error("unknown truth label {0:?}")]
    UnknownTruthLabel(String),

    /// An attribute has a single distinct value and cannot be rank-mapped.
    #[error("attribute {0:?} is constant")]
    ConstantAttribute(String),

    /// Structural input problems: shape mismatches, missing columns,
    /// malformed files.
    #[error("validation: {0}")]
    Validation(String),

    /// A persisted file declares a schema version this build cannot read.
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than by fitting itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Domain(_)
                | Error::InsufficientClassSize { .. }
                | Error::UnknownTruthLabel(_)
                | Error::ConstantAttribute(_)
                | Error::Validation(_)
                | Error::SchemaVersion { .. }
        )
    }

    /// True for errors raised when estimation fails to converge.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::AllRunsDiscarded(_) | Error::DegenerateData(_)
        )
    }
}
