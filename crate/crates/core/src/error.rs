use thiserror::Error;

/// Errors raised by parameter validation, field construction and the
/// numerical engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An admissibility constraint on the space or weight parameters failed.
    #[error("range violation: {constraint} ({detail})")]
    RangeViolation {
        constraint: &'static str,
        detail: String,
    },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("unknown catalog id `{0}`")]
    UnknownCatalogId(String),

    #[error("malformed field spec `{0}`")]
    MalformedFieldSpec(String),

    #[error("importance density is not normalizable: {0}")]
    NonNormalizableDensity(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("tensor oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    #[error("search exhausted its budget: {0}")]
    FailureAtBudget(String),

    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn range(constraint: &'static str, detail: impl Into<String>) -> Self {
        Error::RangeViolation {
            constraint,
            detail: detail.into(),
        }
    }
}
