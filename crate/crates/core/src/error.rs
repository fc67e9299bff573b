use thiserror::Error;

/// Errors raised by the threshold library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("vacuous state (mu = 1) has no transformed image; use the vacuous branch")]
    VacuousState,

    #[error("s = 0 is a blow-up state with no finite (p, mu) preimage")]
    BlowUpState,

    #[error("operation requires the {expected} damping regime, got {actual}")]
    WrongRegime {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("mu0 = {mu0} >= 1 is not admissible here; use classify_vacuous for mu0 = 1")]
    NotNonVacuous { mu0: f64 },

    #[error("s = {s} lies outside the table domain [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("inconsistent profile data at node {node}: {reason}")]
    InconsistentProfile { node: usize, reason: String },

    #[error("rate fit failed: {0}")]
    Fit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
