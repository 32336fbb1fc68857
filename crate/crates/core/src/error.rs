use thiserror::Error;

/// Errors produced while building methods, stepping, or running studies.
#[derive(Debug, Error)]
pub enum Error {
    #[error("stage count must be at least 1")]
    ZeroStages,

    #[error("quadrature node count k = {k} is smaller than the stage count s = {s}")]
    TooFewNodes { s: usize, k: usize },

    #[error("tableau certification failed: {0}")]
    Certification(String),

    #[error("matrix is singular")]
    Singular,

    #[error("eigenvalue iteration did not converge for a matrix of order {0}")]
    EigenNoConvergence(usize),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("value {value} outside of the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fixed-point iteration diverged after {iterations} sweeps (last increment {defect:e})")]
    FixedPointDiverged { iterations: usize, defect: f64 },

    #[error("right-hand side produced a non-finite value")]
    NonFiniteState,

    #[error("step {index} failed: {source}")]
    StepFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("problem `{0}` has no Hamiltonian")]
    MissingHamiltonian(String),

    #[error("problem `{0}` has neither a period nor a reference solution")]
    MissingReference(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
}

impl Error {
    /// True when the error (or the step error it wraps) is a fixed-point divergence.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::FixedPointDiverged { .. } => true,
            Error::StepFailed { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
