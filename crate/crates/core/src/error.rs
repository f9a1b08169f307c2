use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: &'static str },
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("invalid argument: {context}")]
    InvalidArgument { context: &'static str },
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("bisection for the {what} multiplier did not converge in {iterations} iterations")]
    Bisection { what: &'static str, iterations: usize },
    #[error("objective increased by {increase:.3e} at iteration {iteration}")]
    ObjectiveIncrease { iteration: usize, increase: f64 },
    #[error("coincident points at zero distance in {context}")]
    ZeroDistance { context: &'static str },
    #[error("non-finite objective at sample {sample}, iteration {iteration}")]
    NonFiniteObjective { sample: usize, iteration: usize },
    #[error("too many failed realizations: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Numerical failure, as opposed to a configuration problem.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Config { .. } | Error::InvalidArgument { .. })
    }
}
