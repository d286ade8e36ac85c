//! Dense vectors and matrices, Cholesky solves, and the seeded generator
//! every stochastic component draws from.

mod matrix;
mod rng;
mod vector;

pub use matrix::{Cholesky, DenseMatrix};
pub use rng::Rng;
pub use vector::{axpy, elementwise, ElementwiseOp, ParamVector};

/// Solves `F x = b` for symmetric positive definite `F` by Cholesky factorization.
pub fn solve_spd(f: &DenseMatrix, b: &ParamVector) -> crate::Result<ParamVector> {
    Cholesky::new(f)?.solve(b)
}
