use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DpcError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DpcError {
    #[error("{path}: empty file (no header or no data rows)")]
    EmptyFile { path: PathBuf },

    #[error("missing column `{column}`")]
    MissingColumn { column: String },

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: value {value} is not finite")]
    NonFiniteValue {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("duplicate sample id `{sample_id}` in experiment `{experiment_id}`")]
    DuplicateSampleId {
        experiment_id: String,
        sample_id: String,
    },

    #[error("row {row}: empty experiment id")]
    EmptyExperimentId { row: usize },

    #[error("need at least 2 experiments to split, found {found}")]
    TooFewExperiments { found: usize },

    #[error("need at least 2 values, found {found}")]
    TooFewValues { found: usize },

    #[error("unknown property `{0}`")]
    UnknownProperty(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("operation requires a direct-regression backbone, model is {0}")]
    WrongBackboneKind(String),

    #[error("learning-curve size k = {k} exceeds the {available} available training experiments")]
    KTooLarge { k: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DpcError {
    /// True for failures that arise while fitting or evaluating a model
    /// rather than from bad input or configuration.
    pub fn is_runtime(&self) -> bool {
        matches!(self, DpcError::NonFiniteLoss { .. })
    }
}
