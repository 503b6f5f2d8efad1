use crate::cuboid::Axis;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("index out of bounds: {0}")]
    Index(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("axis {axis} of length {len} is not divisible into {parts} parts")]
    Divisibility {
        axis: Axis,
        len: usize,
        parts: usize,
    },

    #[error("invalid code specification: {0}")]
    InvalidCode(String),

    #[error("insufficient results: have {have}, need {need}")]
    InsufficientResults { have: usize, need: usize },

    #[error("interpolation system is ill-conditioned: estimate {estimate:e} exceeds {limit:e}")]
    Conditioning { estimate: f64, limit: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("incomplete assembly: missing layers {missing:?}")]
    IncompleteAssembly { missing: Vec<usize> },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Numerical failures (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InsufficientResults { .. } | Error::Conditioning { .. }
        )
    }
}
