use thiserror::Error;

/// Errors produced by the model, transforms, controller and integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// A w-frame quantity was requested with |w1| (equivalently |theta|)
    /// below the singularity guard.
    #[error("singular w-frame evaluation: |w1| = {w1:e} is below the guard")]
    Singularity { w1: f64 },

    #[error("non-finite input: {what}")]
    NonFiniteInput { what: &'static str },

    #[error("initial heading theta = {theta:e} is too close to the singular set w1 = 0")]
    InitialSingularity { theta: f64 },

    #[error("step size underflow at t = {t}: dt = {dt:e} below dt_min (state {state:?})")]
    StepUnderflow { t: f64, dt: f64, state: [f64; 5] },

    #[error("non-finite state detected at t = {t}")]
    NonFinite { t: f64 },

    #[error("degenerate interval: {0}")]
    DegenerateInterval(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used in run summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::Singularity { .. } => "Singularity",
            Error::NonFiniteInput { .. } => "NonFiniteInput",
            Error::InitialSingularity { .. } => "InitialSingularity",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::NonFinite { .. } => "NonFinite",
            Error::DegenerateInterval(_) => "DegenerateInterval",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
