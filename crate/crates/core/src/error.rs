use thiserror::Error;

/// Errors raised by the simulator, controllers and tuning harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A state variable became NaN or infinite during integration.
    #[error("non-finite state in `{field}` at t = {time:.6} s")]
    NonFiniteState { field: &'static str, time: f64 },

    /// A configuration, scenario or parameter set failed validation.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    /// The phasor network could not be solved.
    #[error("singular network: {0}")]
    SingularNetwork(String),

    /// The optimizer could not find any stable point.
    #[error("no feasible improvement: every start diverged")]
    NoFeasibleImprovement,
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
