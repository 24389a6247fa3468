use interp_hls::power::PowerError;
use thiserror::Error;

/// Failure classes mapped to process exit codes.
#[derive(Debug, Error)]
pub enum Failure {
    /// Malformed input: bad JSON, unknown keys, source syntax errors.
    #[error("{0}")]
    Syntax(String),
    /// Well-formed input that violates a semantic rule.
    #[error("{0}")]
    Invalid(String),
    /// Numerically infeasible request, e.g. a negative routing residual.
    #[error("{0}")]
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Syntax(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<PowerError> for Failure {
    fn from(e: PowerError) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

/// Exit code for an error: the first [`Failure`] in its chain, else 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|c| c.downcast_ref::<Failure>())
        .map_or(1, Failure::code)
}
