use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Newton iteration for root {index} of L_{degree} did not converge within {iterations} iterations")]
    QuadratureNoConvergence {
        degree: usize,
        index: usize,
        iterations: usize,
    },

    #[error("Volterra upper limit must be positive, got {0}")]
    NonPositiveUpperLimit(f64),

    #[error("division by zero while recording on the tape")]
    DivisionByZero,

    #[error("operands belong to different tapes")]
    TapeMismatch,

    #[error("invalid network configuration: {0}")]
    InvalidNetwork(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("collocation point x = {0} lies in the singular-kernel exclusion zone")]
    SingularPoint(f64),

    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("supervised training requires an exact solution")]
    MissingExactSolution,

    #[error("training diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("unknown experiment id {0} (expected 1, 2, 3 or 4)")]
    UnknownExperiment(u32),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
