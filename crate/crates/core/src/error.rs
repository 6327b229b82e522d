use thiserror::Error;

/// Errors raised by the discretization, assembly and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite function value: {0}")]
    InvalidFunction(String),

    #[error("exponential overflow on element {element}")]
    Overflow { element: usize },

    #[error("mesh or degree mismatch: {0}")]
    Mismatch(String),

    #[error("singular linear system in Newton step")]
    SingularSystem,

    #[error("Newton iteration did not converge: {0}")]
    NonConvergence(Box<crate::solver::NonConvergence>),

    #[error("ODE integration failed at s = {at}: step size underflow")]
    StepSizeUnderflow { at: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
