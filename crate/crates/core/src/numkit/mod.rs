//! Small dense linear algebra and a seeded Gaussian random source.
//!
//! Everything here is sized for desk-scale problems (a handful of
//! dimensions), so matrices are plain row-major `Vec<f64>` buffers and all
//! inverses are applied through a Cholesky factor.

mod linalg;
mod random;

pub use linalg::{spd_solve, Matrix, SpdFactor, Vector};
pub use random::{gaussian_vector, RandomSource};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}
