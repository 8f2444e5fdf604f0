use thiserror::Error;

/// Errors raised by the discretization, solvers and harness.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("potential leaves the Kähler cone: min(1 + Δφ) = {min_value:e} at node {node}")]
    NotInKahlerCone { min_value: f64, node: usize },

    #[error("field does not match grid: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("Newton iteration diverged at t = {t}: residual {residual:e} after {iterations} iterations")]
    NewtonDiverged { t: f64, residual: f64, iterations: usize },

    #[error("Newton iterate kept leaving the Kähler cone at t = {t}")]
    ConeBoundary { t: f64 },

    #[error("linearization is singular at t = {t} (condition estimate {condition:e})")]
    SingularLinearization { t: f64, condition: f64 },

    #[error("path trace does not reach t = {missing}")]
    IncompleteTrace { missing: f64 },

    #[error("flow lost positivity at s = {s} (step {step:e})")]
    PositivityCollapse { s: f64, step: f64 },

    #[error("flow needed more than {max_steps} steps (reached s = {s})")]
    StiffnessBailout { s: f64, max_steps: usize },

    #[error("target J = {target} unreachable inside the cone (max attainable {max_attainable})")]
    TargetUnreachable { target: f64, max_attainable: f64 },

    #[error("{failed} of {total} sweep rows failed")]
    SweepFailed { failed: usize, total: usize },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
