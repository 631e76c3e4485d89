//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: input header is missing column '{0}'")]
    MissingColumn(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown stage code '{0}' (not present in the stage map)")]
    UnknownStageCode(String),

    #[error("negative survival months: {0}")]
    NegativeMonths(i64),

    #[error("cohort is empty")]
    EmptyCohort,

    #[error("only one class present: {0}")]
    SingleClass(String),

    #[error("class '{class}' has {count} members, fewer than k = {k}")]
    ClassTooSmall {
        class: String,
        count: usize,
        k: usize,
    },

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{got} features exceed the exact-enumeration limit of {max}; use kernel_shapley")]
    TooManyFeatures { got: usize, max: usize },

    #[error("{what} needs at least {min} samples, got {got}")]
    TooFewSamples {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("all perturbation weights vanished even after widening the kernel")]
    DegenerateKernel,

    #[error("duplicate feature '{0}' in a top-feature list")]
    DuplicateFeature(String),

    #[error("zero variance in sample for '{0}'")]
    ZeroVariance(String),

    #[error("unsupported model format version {0}")]
    ModelVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}
