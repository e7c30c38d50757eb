use thiserror::Error;

/// Errors raised by the model, the simulators and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("quadrature budget of {subdivisions} subdivisions exhausted (estimate {estimate:e}, error {error:e})")]
    QuadratureBudget {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("step halving exhausted after {halvings} halvings at t = {time}")]
    StepHalvingExhausted { halvings: u32, time: f64 },

    #[error("not computable: {0}")]
    NotComputable(&'static str),

    #[error("time {0} is not on the simulation grid")]
    OffGrid(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
