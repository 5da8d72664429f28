use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_id}: file is empty or has no data rows")]
    EmptyFile { source_id: String },

    #[error("{source_id}: malformed CSV at row {row}: {message}")]
    MalformedCsv {
        source_id: String,
        row: usize,
        message: String,
    },

    #[error("{source_id}: label column {column} not found in header")]
    MissingLabelColumn { source_id: String, column: String },

    #[error("{source_id}: column `{column}` listed in drop_columns not found in header")]
    MissingDropColumn { source_id: String, column: String },

    #[error("{source_id}: label column `{column}` must hold exactly two classes, found {found:?}")]
    LabelClasses {
        source_id: String,
        column: String,
        found: Vec<String>,
    },

    #[error("{source_id}: positive label `{label}` does not occur in column `{column}`")]
    UnknownPositiveLabel {
        source_id: String,
        column: String,
        label: String,
    },

    #[error(
        "{source_id}: row {row}, column `{column}`: cannot parse `{value}` as a finite number"
    )]
    NonNumericCell {
        source_id: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("warm-up of {warmup} leaves no unlabeled pool: only {available} non-test points")]
    WarmupTooLarge { warmup: usize, available: usize },

    #[error("invalid test fraction {0}: must lie strictly between 0 and 1")]
    InvalidTestFraction(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("labeled set is empty")]
    EmptyLabeledSet,

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("need at least {needed} labeled points, have {have}")]
    TooFewLabeled { needed: usize, have: usize },

    #[error("leave-one-out losses are only defined for k-NN models")]
    LeaveOneOutUnsupported,

    #[error("bandwidth must be strictly positive, got {0}")]
    InvalidBandwidth(f64),

    #[error("invalid bandwidth grid: {0}")]
    InvalidGrid(String),

    #[error("batch size {batch} exceeds pool size {pool}")]
    BatchTooLarge { batch: usize, pool: usize },

    #[error("batch size must be at least 1")]
    EmptyBatch,

    #[error("risk value {value} at position {position} is negative or not finite")]
    InvalidRisk { position: usize, value: f64 },

    #[error("risk field has no value for pool index {0}")]
    RiskFieldMismatch(usize),

    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),

    #[error("lambda is {0} but no variance hook was supplied")]
    MissingVarianceHook(f64),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("cannot compute the SEM of an empty sample")]
    EmptySample,
}

pub type Result<T> = std::result::Result<T, Error>;
