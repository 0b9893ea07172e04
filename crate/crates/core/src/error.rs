use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zero total follow-up time")]
    ZeroFollowUp,

    #[error("no events: hazard unidentifiable")]
    NoEvents,

    #[error("need at least 2 distinct event times to fit a Weibull shape, got {0}")]
    TooFewEventTimes(usize),

    #[error("Weibull fit did not converge after {iterations} iterations (last shape {last_shape})")]
    NonConvergence { iterations: usize, last_shape: f64 },

    #[error("non-finite MLE")]
    NonFiniteMle,

    #[error("both arms must be present")]
    SingleArm,

    #[error("between-variance undefined: need at least 2 estimates, got {0}")]
    TooFewImputations(usize),

    #[error("empty donor pool")]
    EmptyDonorPool,

    #[error("empty selection")]
    EmptySelection,

    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("sweep point {param}: only {succeeded} of {attempted} Cox fits succeeded")]
    SweepPointFailed {
        param: f64,
        succeeded: usize,
        attempted: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
