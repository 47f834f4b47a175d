use thiserror::Error;

/// Errors raised by data loading, model assembly and estimation.
#[derive(Debug, Error)]
pub enum VarxError {
    #[error("{source_name}: dimension mismatch: {detail}")]
    DimensionMismatch { source_name: String, detail: String },

    #[error("{source_name}: non-finite or unparsable value {value:?} at row {row}, column {column:?}")]
    InvalidCell {
        source_name: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{source_name}: empty cell at row {row}, column {column:?}")]
    EmptyCell {
        source_name: String,
        row: usize,
        column: String,
    },

    #[error("{source_name}: duplicate series name {name:?}")]
    DuplicateName { source_name: String, name: String },

    #[error("{source_name}: {detail}")]
    Format { source_name: String, detail: String },

    #[error("invalid model orders: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("design matrix is identically zero; step size undefined")]
    DegenerateDesign,

    #[error("endogenous response is identically zero; no penalty grid anchor")]
    ZeroResponse,

    #[error("insufficient history: need {needed} columns, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("not enough observations: {0}")]
    TooFewObservations(String),

    #[error("every grid point failed during cross-validation")]
    AllFitsFailed,

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("spectral radius bisection did not converge within {0} steps")]
    BisectionNoConvergence(usize),

    #[error("{source_name}: {err}")]
    Csv {
        source_name: String,
        #[source]
        err: csv::Error,
    },

    #[error("{path}: {err}")]
    Io {
        path: String,
        #[source]
        err: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, VarxError>;
