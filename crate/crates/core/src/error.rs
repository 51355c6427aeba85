use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "quadrature failed to converge on [{lower}, {upper}]: estimate {estimate:e}, \
         error {abs_error:e} > tolerance {tolerance:e} after {intervals} subintervals"
    )]
    QuadratureNonConvergence {
        lower: f64,
        upper: f64,
        estimate: f64,
        abs_error: f64,
        tolerance: f64,
        intervals: usize,
    },

    #[error("push target infeasible: {0}")]
    Infeasible(String),

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("layout: {0}")]
    Layout(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
