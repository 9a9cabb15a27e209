use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("empty file: no data rows")]
    EmptyFile,

    #[error("missing column {column}")]
    MissingColumn { column: String },

    #[error("non-binary treatment at row {row} (column d): {value}")]
    NonBinaryTreatment { row: usize, value: String },

    #[error("non-finite value at row {row}, column {column}: {value}")]
    NonFinite {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("insufficient opposite-group units: need {needed} matches but min(n0, n1) = {available}")]
    InsufficientUnits { needed: usize, available: usize },

    #[error("insufficient units for degree {degree}: arm {arm} has {units} units but the basis has {terms} terms")]
    InsufficientForDegree {
        degree: usize,
        arm: u8,
        units: usize,
        terms: usize,
    },

    #[error("empty treatment arm {arm}")]
    EmptyArm { arm: u8 },

    #[error("non-finite transform output for unit {unit}")]
    NonFiniteTransform { unit: usize },

    #[error("operation requires an oracle regressor: {0}")]
    OracleRequired(&'static str),

    #[error("too few bootstrap replicates: have {have}, need at least {need} for alpha = {alpha}")]
    TooFewReplicates { have: usize, need: usize, alpha: f64 },

    #[error("invalid argument {name}: {message}")]
    InvalidArgument { name: &'static str, message: String },

    #[error("non-finite limiting variance for dgp {0}")]
    DegenerateVariance(String),

    #[error("unknown dgp {0}")]
    UnknownDgp(String),

    #[error("json serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            message: message.into(),
        }
    }

    /// Stable machine-readable tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
            Error::EmptyFile => "empty_file",
            Error::MissingColumn { .. } => "missing_column",
            Error::NonBinaryTreatment { .. } => "non_binary_treatment",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::InsufficientUnits { .. } => "insufficient_units",
            Error::InsufficientForDegree { .. } => "insufficient_for_degree",
            Error::EmptyArm { .. } => "empty_arm",
            Error::NonFiniteTransform { .. } => "non_finite_transform",
            Error::OracleRequired(_) => "oracle_required",
            Error::TooFewReplicates { .. } => "too_few_replicates",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::DegenerateVariance(_) => "degenerate_variance",
            Error::UnknownDgp(_) => "unknown_dgp",
            Error::Json(_) => "json",
        }
    }
}
