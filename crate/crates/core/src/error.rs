use thiserror::Error;

#[derive(Debug, Error)]
pub enum FaroError {
    #[error("invalid {field}: {msg}")]
    Validation { field: String, msg: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("empty cell: {0}")]
    EmptyCell(String),

    #[error("equalized-odds constraint infeasible: group {group} has no examples with predicted label {label}")]
    EoInfeasible { group: usize, label: u8 },

    #[error("inner minimization diverged: loss increased for {0} consecutive steps (step size too large)")]
    Divergence(usize),

    #[error("zero reference mass for action {action} in context {context}")]
    ZeroReferenceMass { context: usize, action: usize },

    #[error("support violation: policy puts mass on action {action} of context {context} where the reference has none")]
    SupportViolation { context: usize, action: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FaroError {
    pub fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        FaroError::Validation {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by user input rather than by the library.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, FaroError::Io(e) if e.kind() != std::io::ErrorKind::NotFound)
    }
}

pub type Result<T> = std::result::Result<T, FaroError>;
