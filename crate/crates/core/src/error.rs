use thiserror::Error;

/// Errors raised by model construction, chain analysis and the solvers.
#[derive(Debug, Error)]
pub enum MsvError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The chain is not irreducible; `block` lists states that cannot reach
    /// (or cannot be reached from) state 0.
    #[error("singular chain: {reason}; offending block {block:?}")]
    Singular { reason: String, block: Vec<usize> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dual temperature bracket exhausted at {edge} edge ({value:e}); widen the bracket [{lo:e}, {hi:e}]")]
    BracketExhausted {
        edge: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// An exact identity failed beyond tolerance. This signals a numerical
    /// bug, not bad input.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("precision target not met: {0}")]
    Precision(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = MsvError> = std::result::Result<T, E>;
