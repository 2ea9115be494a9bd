use std::fmt;

use crate::matrix::IndexWidth;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("block with {ncols} columns does not fit {width:?} indices")]
    Capacity { ncols: usize, width: IndexWidth },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("vector is not initialized")]
    Uninitialized,

    #[error("zero or missing diagonal entry in row {row}")]
    SingularDiagonal { row: usize },

    #[error("matrix is singular to working precision (pivot column {column})")]
    SingularMatrix { column: usize },

    #[error("{method} breakdown in column {column}: {reason}")]
    Breakdown {
        method: &'static str,
        column: usize,
        reason: &'static str,
    },

    #[error("residual drift in column {column}: true/recursive residual ratio {ratio:.3e}")]
    Instability { column: usize, ratio: f64 },

    #[error("AMG setup degeneracy: {count} F-point(s) without interpolation support (first row {first})")]
    SetupDegeneracy { count: usize, first: usize },

    #[error("row {row} of the plan for leaf {leaf} is not imported from peer {peer}")]
    UnplannedRow { leaf: usize, peer: usize, row: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(args: fmt::Arguments<'_>) -> Self {
        Error::ShapeMismatch(args.to_string())
    }
}
