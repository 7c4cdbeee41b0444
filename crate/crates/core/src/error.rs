use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised while building or analysing a glued complex.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ambiguous identification: {0}")]
    Ambiguity(String),

    /// A structural hypothesis of the glued setting is violated
    /// (boundary-touching intersection, overlapping intersections, ...).
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("non-integrable weight: exponent {alpha} outside ({lo}, {hi})")]
    NonIntegrableWeight { alpha: f64, lo: f64, hi: f64 },

    #[error("degenerate cell {cell} in piece {piece}")]
    DegenerateCell { piece: usize, cell: usize },

    #[error("numeric failure: {what} (residual {residual:e})")]
    Numeric { what: String, residual: f64 },

    /// Positive off-diagonal stiffness entries `(row, col, value)`.
    #[error("non-compliant mesh: {} positive off-diagonal entries", .entries.len())]
    NonCompliantMesh { entries: Vec<(usize, usize, f64)> },

    #[error("resolution: {0}")]
    Resolution(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn hypothesis(msg: impl Into<String>) -> Self {
        Error::HypothesisViolation(msg.into())
    }

    /// True for errors that signal a violated modelling hypothesis rather
    /// than bad input or a numeric failure.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::HypothesisViolation(_) | Error::NonIntegrableWeight { .. } | Error::NonCompliantMesh { .. }
        )
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. })
    }
}

pub type Result<T> = core::result::Result<T, Error>;
