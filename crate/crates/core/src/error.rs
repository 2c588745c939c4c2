//! Crate-wide error type.

/// Errors raised across the solver stack. Configuration and contract
/// violations are distinguished from runtime integration failures so callers
/// can map them to different exit paths.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on user-supplied configuration was violated.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The requested operation is outside the supported envelope.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A stage or solution value left the representable range.
    #[error("solution blew up at t = {t} (step size {dt})")]
    BlowUp { t: f64, dt: f64 },

    /// The implicit stage system was singular for this step size.
    #[error("singular linear system in implicit step at t = {t} (step size {dt})")]
    SingularSystem { t: f64, dt: f64 },

    /// The step budget ran out before reaching the end of the interval.
    #[error("step budget of {budget} exhausted at t = {t}")]
    StepBudget { budget: usize, t: f64 },

    /// Not enough usable data points for the requested fit or diagnostic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
