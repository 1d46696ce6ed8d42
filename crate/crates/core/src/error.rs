use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |G - G*| = {deviation:.3e} exceeds {tol:.1e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("kernel not PSD: smallest eigenvalue {lambda_min:.6e}")]
    NotPsd { lambda_min: f64 },

    #[error("Gram matrices are defined on different point lists")]
    PointMismatch,

    #[error("word enumeration budget of {budget} evaluations exceeded at depth {depth}; supply a point key that collapses the tree")]
    BudgetExceeded { budget: usize, depth: usize },

    #[error("subinvariance violated: diagonal increment {value:.6e} at level {level} is negative beyond tolerance")]
    BrokenSubinvariance { value: f64, level: usize },

    #[error("invalid unit flow: {reason}")]
    InvalidFlow { reason: String },

    #[error("power iteration did not converge in {iters} iterations (residual {residual:.3e})")]
    PowerIterationDiverged { iters: usize, residual: f64 },

    #[error("point is not certified inside the finiteness locus: {verdict}")]
    NotInFinitenessLocus { verdict: String },

    #[error("boundary second-moment bound not certified: {reason}")]
    NotCertified { reason: String },

    #[error("candidate fails its own precondition: {reason}")]
    CandidatePrecondition { reason: String },

    #[error("weight domain violation: {reason}")]
    WeightDomain { reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
