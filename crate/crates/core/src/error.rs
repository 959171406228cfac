use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbpError {
    /// The map `x2 -> (1 + gamma) x2` degenerates (`1 + gamma <= 0`).
    #[error("degenerate geometry: 1 + gamma = {one_plus_gamma} at x1 = {x1}")]
    DegenerateGeometry { one_plus_gamma: f64, x1: f64 },

    #[error("singular system: non-positive pivot {pivot} at unknown {index}")]
    SingularSystem { index: usize, pivot: f64 },

    #[error("{solver} did not converge after {iterations} iterations (last increment {last_increment:e})")]
    MaxIterations {
        solver: &'static str,
        iterations: usize,
        last_increment: f64,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown norm kind: {0}")]
    UnknownNorm(String),

    /// theta_1 outside the open interval (beta C_A / (1 + beta C_A), 1).
    #[error("theta1 = {theta1} outside admissible interval ({lower}, 1)")]
    ThetaRange { theta1: f64, lower: f64 },

    #[error("power iteration did not converge after {iterations} iterations")]
    PowerIteration { iterations: usize },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = FbpError> = std::result::Result<T, E>;

impl From<std::io::Error> for FbpError {
    fn from(e: std::io::Error) -> Self {
        FbpError::Io(e.to_string())
    }
}

impl From<csv::Error> for FbpError {
    fn from(e: csv::Error) -> Self {
        FbpError::Io(e.to_string())
    }
}
