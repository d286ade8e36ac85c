//! Gradient-based optimizers, exact natural gradient descent, and executable
//! checks of the theory connecting them.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense vectors, matrices, Cholesky solves, seeded RNG
//! - [`problems`]: loss/gradient oracles (quadratics, Gaussian regression,
//!   softmax regression, the MNIST MLP) and the IDX loader
//! - [`optimizers`]: GD, momentum, NAG and its gradient-difference form,
//!   Adagrad, RMSprop, Adam, AdaSqrt
//! - [`ngd`]: Fisher information matrices and the natural gradient step
//! - [`verify`]: numerical checks with pass/fail reports
//! - [`harness`]: configs, training loop, CSV traces, comparisons, sweeps

pub mod error;
pub mod harness;
pub mod linalg;
pub mod ngd;
pub mod optimizers;
pub mod problems;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, ParamVector, Rng};
pub use optimizers::{Method, Optimizer, OptimizerConfig, OptimizerState};
pub use problems::{Problem, ProblemKind};
