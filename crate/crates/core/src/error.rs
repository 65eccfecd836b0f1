use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("Fock truncation needs {required} levels but the cap is {cap}")]
    TruncationCap { required: usize, cap: usize },

    #[error("coefficient function not evaluable at ({re}, {im}): {what}")]
    NonEvaluable { what: &'static str, re: f64, im: f64 },

    #[error("grid too small for quadrature (boundary Q = {boundary_q:e}); use an extent of at least {suggested_extent}")]
    GridTooSmall { boundary_q: f64, suggested_extent: f64 },

    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
