use thiserror::Error;

/// Errors raised while validating inputs or running either inference engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("design matrix column 0 must be an intercept column of ones (row {row} holds {value})")]
    MissingIntercept { row: usize, value: f64 },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),

    #[error("probit response must be 0/1, found {value} at index {index}")]
    InvalidBinaryResponse { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no admissible positive root for mode equation (nu={nu}, d={d}, b={b}, c={c})")]
    NoPositiveRoot { nu: i32, d: f64, b: f64, c: f64 },

    #[error("adaptive quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("rejection sampler stalled after {proposals} proposals")]
    AcceptanceStall { proposals: u64 },

    #[error("linear system is numerically singular: {0}")]
    SingularSystem(&'static str),

    #[error("numerical overflow at iteration {iteration}: {what}")]
    NumericalOverflow { iteration: usize, what: String },

    #[error("lower bound decreased by {drop:e} at iteration {iteration}")]
    ElboDecrease { iteration: usize, drop: f64 },

    #[error("coordinate descent did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("labels must contain at least one positive and one negative")]
    DegenerateLabels,

    #[error("too many co-data columns ({columns}) for n = {n}")]
    TooManyCodataColumns { columns: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
