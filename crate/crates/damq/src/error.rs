//! Error type shared by all analysis modules.
//!
//! Every failure carries enough context to tell the caller *which*
//! mathematical precondition broke, not merely that "something" did.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A parameter is outside its mathematical domain (non-positive rate,
    /// probabilities that do not sum to one, transform argument outside the
    /// region of analyticity, and so on).
    #[error("domain error in {place}: {reason}")]
    Domain { place: &'static str, reason: String },

    /// The recurrence Qₙ₊₁ = (Qₙ − Σ fᵢQₙ₋ᵢ₊₁)/f₀ cannot be advanced
    /// because f₀ ≤ 0 (a service during which no unit can fail to arrive).
    #[error("singular recurrence: f0 = {f0} is not positive")]
    Singular { f0: f64 },

    /// The exact stationary probabilities failed their closure check; this
    /// signals a corrupted busy-period table upstream, not a user error.
    #[error("stationary probabilities sum to 1{defect:+e}, beyond tolerance {tol:e}")]
    Normalization { defect: f64, tol: f64 },

    /// No sign change was found while walking the bracket for a root of
    /// z = B̂₁(λ−λR̂(z)) on the requested side of 1.
    #[error("no bracket for the {side} root: walked to z = {last_z} without a sign change")]
    NoBracket { side: &'static str, last_z: f64 },

    /// The emergency regime cannot drain the dam (ρ₂ ≥ 1); neither the
    /// exact formulas nor the simulation are meaningful.
    #[error("unstable emergency regime: rho2 = {rho2} fails to obey the condition rho2 < 1")]
    Stability { rho2: f64 },

    /// Configuration file could not be read or does not satisfy the schema.
    #[error("config error: {0}")]
    Config(String),

    /// An output file could not be written.
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line driver: schema and
    /// configuration problems map to 2, numeric failures to 3.
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn domain(place: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { place, reason: reason.into() }
    }
}
