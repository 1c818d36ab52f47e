use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance eigenvalue {index} is {value}; eigenvalues must be finite and positive")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("covariance eigenvalues must be non-increasing (lambda[{index}] = {next} > lambda[{prev_index}] = {prev})", prev_index = index - 1)]
    NotMonotone { index: usize, prev: f64, next: f64 },

    #[error("dimension {got} out of range 1..={max}")]
    Dimension { got: usize, max: usize },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {what} at coordinate {coordinate}")]
    NonFinite { what: &'static str, coordinate: usize },

    #[error("invalid exponent p = {p}: {reason}")]
    Exponent { p: f64, reason: &'static str },

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("resolvent (alpha I - A) is near-singular for alpha = {alpha} (condition number {condition:e})")]
    Resolvent { alpha: f64, condition: f64 },

    #[error("epsilon schedule violates decay of sqrt(n)*eps_n at n = {n}: {detail}")]
    Schedule { n: usize, detail: String },

    #[error("simulation blew up on path {path} at step {step}")]
    Simulation { path: usize, step: usize },

    #[error("Newton iteration failed at time step {step}: residual {residual:e} after {iterations} iterations")]
    Newton {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("PSOR iteration cap exceeded at time step {step}: residual {residual:e}")]
    Psor { step: usize, residual: f64 },

    #[error("linear solver failed to converge: residual {residual:e} after {iterations} iterations")]
    LinearSolve { residual: f64, iterations: usize },

    #[error("explicit scheme unstable: dt * max diagonal rate = {ratio} > 1")]
    Stability { ratio: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("regression basis of degree {degree} is rank deficient (rank {rank} of {columns}); reduce the degree")]
    Basis {
        degree: usize,
        rank: usize,
        columns: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
