use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: String,
        got: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("model is not coherent: det(Phi0+) = {det_plus:.6e}, det(Phi0-) = {det_minus:.6e}")]
    Incoherent { det_plus: f64, det_minus: f64 },

    #[error("no ordering of the equations gives an invertible x-block of Phi0")]
    SingularXBlock,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bisection bracket inverted: lo = {lo} > hi = {hi}")]
    BracketInversion { lo: f64, hi: f64 },

    #[error("could not certify feasibility at the upper bracket {0}")]
    UpperBracketInfeasible(f64),

    #[error("model file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(what: &str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        what: what.to_string(),
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
