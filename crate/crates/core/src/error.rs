use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A truncated Fock space is too small for the requested object: the
    /// population in the top levels exceeds the leakage tolerance, or a
    /// pre-construction amplitude guard failed.
    #[error("truncation leakage in {what}: {detail}")]
    Leakage { what: String, detail: String },

    /// A parameter lies outside the domain where the model is defined.
    #[error("parameter `{param}` = {value} is out of domain: {reason}")]
    Domain {
        param: &'static str,
        value: f64,
        reason: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Conditional state requested for a measurement branch of (near) zero
    /// probability.
    #[error("measurement branch {branch} has probability {probability:e}; conditional state undefined")]
    DegenerateBranch { branch: char, probability: f64 },

    /// Degenerate input that collapses the requested construction.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The adaptive integrator could not make progress.
    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl Error {
    /// True for errors caused by a violated truncation or domain guard, as
    /// opposed to malformed requests.
    pub fn is_guard_violation(&self) -> bool {
        matches!(self, Error::Leakage { .. } | Error::Domain { .. })
    }

    pub(crate) fn leakage(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Leakage {
            what: what.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
