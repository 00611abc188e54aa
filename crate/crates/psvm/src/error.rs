//! Crate-wide error type.

use thiserror::Error;

/// Coarse classification used by callers that map failures to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Problem with user-supplied data or files.
    Data,
    /// Numerical failure during computation.
    Numeric,
    /// Invalid configuration or argument combination.
    Usage,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero spread")]
    DegenerateColumn(usize),
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("dividing point {0} leaves one side empty")]
    EmptySide(usize),
    #[error("slice {0} is empty")]
    EmptySlice(usize),
    #[error("labels must contain both +1 and -1")]
    InfeasibleLabels,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix has rank {rank}, need {need} independent columns")]
    RankDeficientBasis { rank: usize, need: usize },
    #[error("input is constant; rank correlation undefined")]
    ConstantInput,
    #[error("response has zero spread")]
    ZeroSpread,
    #[error("no support vectors; intercept undefined")]
    NoSupportVectors,
    #[error("invalid configuration: {0}")]
    BadSpec(String),
    #[error("file format: {0}")]
    FileFormat(String),
    #[error("class label {0} not present in the data")]
    UnknownLabel(f64),
    #[error("unsupported artifact schema: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::DegenerateColumn(_)
            | Error::EmptySide(_)
            | Error::EmptySlice(_)
            | Error::InfeasibleLabels
            | Error::ZeroSpread
            | Error::FileFormat(_)
            | Error::UnknownLabel(_)
            | Error::SchemaMismatch(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::DimensionMismatch(_) => ErrorCategory::Data,
            Error::NotPsd(_)
            | Error::RankDeficientBasis { .. }
            | Error::ConstantInput
            | Error::NoSupportVectors => ErrorCategory::Numeric,
            Error::BadSpec(_) => ErrorCategory::Usage,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
