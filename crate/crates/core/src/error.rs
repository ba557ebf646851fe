use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter broke one of its declared invariants.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{operation} is not defined for the {profile} motion profile")]
    NotApplicable {
        operation: &'static str,
        profile: &'static str,
    },

    /// Geometry collapsed (non-positive distance) or a population went
    /// negative beyond tolerance.
    #[error("positivity violated: {0}")]
    PositivityViolation(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step budget of {steps} exhausted at t = {t}")]
    StepBudgetExhausted { t: f64, steps: u64 },

    #[error(
        "closed-form dimer solution requires gamma1 = gamma2 + gamma_sink (got {gamma1} vs {gamma2} + {gamma_sink})"
    )]
    GammaConditionViolated { gamma1: f64, gamma2: f64, gamma_sink: f64 },

    #[error("no interior maximum in bracket [{lo}, {hi}]")]
    NoMaximumInBracket { lo: f64, hi: f64 },

    #[error("enhancement does not change sign for dephasing rates up to {limit}")]
    NoSignChange { limit: f64 },

    /// A sweep job failed; `point` names the grid coordinates.
    #[error("at {point}: {source}")]
    AtGridPoint { point: String, source: Box<Error> },

    #[error("no enhancement without dephasing (delta = {delta:e}); critical rate undefined")]
    NoEnhancement { delta: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Attach the grid coordinates at which this error occurred.
    pub fn at(self, point: impl Into<String>) -> Self {
        Error::AtGridPoint {
            point: point.into(),
            source: Box::new(self),
        }
    }
}
