use thiserror::Error;

/// Failures reported by the solver and its helpers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("non-positive water depth h = {value:e} in element {element} at t = {time}")]
    Positivity { element: usize, time: f64, value: f64 },

    #[error("singular elliptic system on elements {start}..={end}: {detail}")]
    Singular {
        start: usize,
        end: usize,
        detail: String,
    },

    #[error("element range {start}..={end} is not a contiguous range inside 0..{n_elements}")]
    InvalidRange {
        start: usize,
        end: usize,
        n_elements: usize,
    },

    #[error("series length mismatch: reference has {reference} samples, candidate has {candidate}")]
    LengthMismatch { reference: usize, candidate: usize },

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("incompatible runs: {0}")]
    Mismatch(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Positivity { .. } | Error::Singular { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
