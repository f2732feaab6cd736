use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value violates the documented domain of a parameter.
    #[error("invalid parameter `{name}`: {constraint} (got {value})")]
    Parameter {
        name: &'static str,
        constraint: &'static str,
        value: String,
    },

    /// The requested risk mode is inconsistent with the parameters.
    #[error("risk mode error: {0}")]
    Mode(String),

    /// A fixed-point iteration failed to settle.
    #[error("no convergence after {iterations} iterations (last iterates {previous} -> {last})")]
    Convergence {
        iterations: usize,
        previous: f64,
        last: f64,
    },

    #[error("capacity exceeded: {what} = {value} > {cap}")]
    Capacity {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    /// The input lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A result is not a valid number or left its admissible range.
    #[error("numerical validity error: {0}")]
    Numerical(String),

    #[error("chain configuration error: {0}")]
    Chain(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("fit error: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, constraint: &'static str, value: impl ToString) -> Self {
        Error::Parameter {
            name,
            constraint,
            value: value.to_string(),
        }
    }
}
