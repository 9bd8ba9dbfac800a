use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: non-finite feature value")]
    NonFiniteFeature { row: usize },

    #[error("row {row}: negative mass")]
    NegativeMass { row: usize },

    #[error("masses sum to {sum}, expected 1")]
    MassSumMismatch { sum: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("row {row}: label {label} outside universe of size {universe}")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        universe: usize,
    },

    #[error("requested {k} rows from a dataset of {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset has fewer than two labels")]
    SingleClassDataset,

    #[error("patch coordinate {coord} outside feature dimension {dim}")]
    BadPatchCoord { coord: usize, dim: usize },

    #[error("need {needed} rows with the base label, found {available}")]
    NotEnoughBaseRows { needed: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cost matrix contains a non-finite or negative entry")]
    NonFiniteCost,

    #[error("instance of size {size} exceeds the limit {limit}")]
    InstanceTooLarge { size: usize, limit: usize },

    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },

    #[error("label {label} occurs only in the {side} dataset")]
    MissingLabel { label: usize, side: &'static str },

    #[error("optimal duals are not unique (drift {drift:e})")]
    DegenerateDuals { drift: f64 },

    #[error("mass change would make point {index} negative")]
    MassWouldGoNegative { index: usize },

    #[error("budget {budget} outside [0, {n}]")]
    BudgetOutOfRange { budget: usize, n: usize },

    #[error("keep count {keep} outside [1, {n}]")]
    KeepOutOfRange { keep: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
