//! Sparse iterative solvers for `A X = B` with several right-hand sides
//! processed together.

pub mod amg;
pub mod blas;
pub mod blas2;
mod error;
pub mod io;
pub mod matrix;
pub mod parallel;
pub mod params;
pub mod solvers;
pub mod stats;

pub use error::{Error, Result};
