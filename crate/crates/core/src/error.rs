use thiserror::Error;

/// Errors raised by the solver, geometry and diagnostics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsiError {
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("empty sample set: {0}")]
    EmptySampleSet(&'static str),

    #[error("bad geometry: {0}")]
    BadGeometry(String),

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("degenerate coefficient: ellipticity constant {value:e} below floor {floor:e}")]
    DegenerateCoefficient { value: f64, floor: f64 },

    #[error("flow map degenerate: {0}")]
    MapDegenerate(String),

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("coupling residual {residual:e} exceeds tolerance {tolerance:e}")]
    CouplingResidualExceeded { residual: f64, tolerance: f64 },

    #[error("insufficient history: need {needed} states, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, FsiError>;

impl From<std::io::Error> for FsiError {
    fn from(e: std::io::Error) -> Self {
        FsiError::Io(e.to_string())
    }
}
