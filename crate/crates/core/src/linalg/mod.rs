//! Small dense real linear algebra: matrix types, the matrix exponential,
//! symmetric and general eigenvalues, and stability predicates.
//!
//! Everything here is pure and sized for state dimensions up to a few tens.

mod decomp;
mod eigen;
mod expm;
mod matrix;

use thiserror::Error;

pub use decomp::{inverse, Cholesky, Lu};
pub use eigen::{
    clip_eigenvalues, eigenvalues, is_hurwitz, is_schur, log_norm, max_eig, min_eig,
    spectral_radius, sym_eig, sym_eigen, Eigenvalue, SymEigen, JACOBI_MAX_SWEEPS, JACOBI_TOL,
};
pub use expm::mat_exp;
pub use matrix::{Matrix, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has no entries")]
    EmptyMatrix,
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("non-finite scalar argument")]
    NonFiniteScalar,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}
