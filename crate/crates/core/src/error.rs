use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(
        "offspring support point {0} is not allowed: every individual must have at least one child"
    )]
    ZeroOffspring(u64),

    #[error("{what} sum to {sum}, expected 1")]
    NotNormalized { what: &'static str, sum: f64 },

    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("environment is not supercritical: mu = {mu} (must be > 0)")]
    NotSupercritical { mu: f64 },

    #[error("log-mean offspring X = ln m is almost surely constant (sigma^2 = {sigma2}); the associated random walk is degenerate")]
    Degenerate { sigma2: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("hypothesis not met: {0}")]
    HypothesisUnmet(String),

    #[error("population {population} exceeded the exact threshold {threshold} at generation {generation}")]
    ThresholdExceeded {
        generation: usize,
        population: u64,
        threshold: u64,
    },

    #[error("enumeration needs {sequences} environment sequences, limit is {limit}")]
    InfeasibleEnumeration { sequences: u128, limit: u64 },

    #[error("report serialization failed: {0}")]
    Serialization(String),
}

impl Error {
    /// Stable machine-readable identifier, used in the CLI error envelope.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ZeroOffspring(_) => "ZERO_OFFSPRING",
            Error::NotNormalized { .. } => "NOT_NORMALIZED",
            Error::InvalidLaw(_) => "INVALID_LAW",
            Error::NotSupercritical { .. } => "NOT_SUPERCRITICAL",
            Error::Degenerate { .. } => "DEGENERATE",
            Error::InvalidParameter(_) => "INVALID_PARAMETER",
            Error::Domain(_) => "DOMAIN_ERROR",
            Error::HypothesisUnmet(_) => "HYPOTHESIS_UNMET",
            Error::ThresholdExceeded { .. } => "THRESHOLD_EXCEEDED",
            Error::InfeasibleEnumeration { .. } => "INFEASIBLE_ENUMERATION",
            Error::Serialization(_) => "SERIALIZATION_ERROR",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
