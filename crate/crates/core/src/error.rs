use alloc::string::String;

/// Everything that can go wrong while building inputs or solving for a plan.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A constructor argument violates the type's invariants.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// The operation's preconditions do not hold for this input.
    #[error("unsupported input for {op}: {reason}")]
    Unsupported { op: &'static str, reason: String },

    /// The target needs no manipulation (already reached at zero cost).
    #[error("target {target} is already implemented by the unmanipulated prices")]
    TrivialTarget { target: f64 },

    /// The cost infimum exists but no plan attains it.
    #[error("minimum cost {infimum} is approached but not attained")]
    Unattained { infimum: f64 },

    /// A proposition's hypotheses are not met by the scenario.
    #[error("hypotheses unmet: {0}")]
    HypothesesUnmet(String),

    /// No searched plan meets the benchmark tolerance.
    #[error("no plan in the search space reaches the target: {0}")]
    Infeasible(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid { what, reason: reason.into() }
}

pub(crate) fn unsupported(op: &'static str, reason: impl Into<String>) -> Error {
    Error::Unsupported { op, reason: reason.into() }
}
