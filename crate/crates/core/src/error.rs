use thiserror::Error;

/// Errors produced by the analytic engine, the optimizer and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid reward spec: {0}")]
    InvalidSpec(String),

    #[error("fixed point did not converge after {iterations} iterations (last step {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("difficulty calibration did not converge after {rounds} rounds (growth rate {growth_rate})")]
    CalibrationFailed { rounds: usize, growth_rate: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter { name, value, reason }
}
