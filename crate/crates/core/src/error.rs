use std::fmt;

use thiserror::Error;

/// One violated invariant, tagged with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn join(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join(.0))]
    Validation(Vec<ValidationError>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} = {value} lies outside the grid [{lo}, {hi}]")]
    OutsideGrid {
        what: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("monotonicity check failed at {cell}: {detail}")]
    Monotonicity { cell: String, detail: String },

    #[error("explicit terms unstable: dt = {dt:.3e} but stability requires dt <= {required:.3e} ({detail})")]
    Cfl {
        dt: f64,
        required: f64,
        detail: String,
    },

    #[error("grid {requested} exceeds the cap {cap}; projected cost {projected_cells} cells, {projected_bytes} bytes per time level")]
    GridCap {
        requested: String,
        cap: String,
        projected_cells: usize,
        projected_bytes: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("malformed surface file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Monotonicity { .. } | Error::Cfl { .. } | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
