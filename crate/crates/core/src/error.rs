use thiserror::Error;

/// Errors raised by the solver and its kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spacelike constraint violated: |Du| = {norm:.6} exceeds 1 - {margin:e}")]
    Spacelike { norm: f64, margin: f64 },

    #[error("point is not on the boundary (defining function = {value:e})")]
    NotOnBoundary { value: f64 },

    #[error("field is not strictly convex at node {node} (smallest Hessian eigenvalue {eigenvalue:e})")]
    NotConvex { node: usize, eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("time step failed: tau = {tau:e} fell below tau_min after Newton failures")]
    StepFailure { tau: f64 },

    #[error("flow did not converge within {steps} steps (last oscillation {last_osc:e})")]
    NonConvergence { steps: usize, last_osc: f64, history: Vec<crate::flow::StepRecord> },

    #[error("translator residual {residual:e} exceeds tolerance {tolerance:e}")]
    TranslatorResidual { residual: f64, tolerance: f64 },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("linear solver failure: {0}")]
    LinearSolve(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
