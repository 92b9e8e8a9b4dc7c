use thiserror::Error;

use crate::survival_model::RoystonParmarModel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: unknown label `{label}`")]
    UnknownLabel {
        row: usize,
        column: String,
        label: String,
    },

    #[error("row {row}, column `{column}`: {reason}")]
    InvalidValue {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("knot error: {0}")]
    Knots(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("design legend mismatch: model expects {expected:?}, data encodes {got:?}")]
    LegendMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },

    #[error("insufficient events: {0}")]
    InsufficientEvents(String),

    #[error("all observations are censored")]
    AllCensored,

    #[error("singular design: {0}")]
    Singular(String),

    #[error("optimizer did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        best: Box<RoystonParmarModel>,
    },

    #[error("model is not monotone: {0}")]
    NonMonotone(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid synthesis plan: {0}")]
    Plan(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
