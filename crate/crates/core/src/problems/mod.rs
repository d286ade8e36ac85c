//! Gradient-oracle problems.
//!
//! Every problem reports its loss as a mean over samples, so learning rates
//! do not depend on dataset size. Probabilistic problems additionally expose
//! per-sample log-likelihood gradients, which is what the Fisher estimators
//! in [`crate::ngd`] consume.

mod linear_gaussian;
mod mlp;
mod mnist;
mod quadratic;
mod softmax;

pub use linear_gaussian::LinearGaussian;
pub use mlp::{MlpModel, MlpParams, MlpProblem, Precision, MNIST_LAYERS};
pub use mnist::{inspect_idx, load_mnist_dir, load_mnist_idx, Dataset, IdxSummary, Split};
pub use quadratic::Quadratic;
pub use softmax::SoftmaxRegression;

use serde::{Deserialize, Serialize};

use crate::linalg::{DenseMatrix, ParamVector, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    LinearGaussian,
    SoftmaxRegression,
    MlpMnist,
}

/// Held-out style evaluation. `error_rate` is only defined for classifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eval {
    pub loss: f64,
    pub error_rate: Option<f64>,
}

/// Access to the closed-form probabilistic models behind a problem.
#[derive(Debug, Clone, Copy)]
pub enum ModelRef<'a> {
    LinearGaussian(&'a LinearGaussian),
    Softmax(&'a SoftmaxRegression),
}

/// A target value of a conditional model: a real response or a class index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Real(f64),
    Class(usize),
}

pub trait Problem: Send + Sync {
    fn kind(&self) -> ProblemKind;

    fn dim(&self) -> usize;

    /// Number of samples indexable by minibatches. Deterministic objectives report 1.
    fn num_samples(&self) -> usize;

    fn loss(&self, theta: &ParamVector) -> f64;

    fn grad(&self, theta: &ParamVector) -> ParamVector;

    /// Mean loss and mean gradient over the given sample indices.
    fn minibatch_loss_grad(&self, theta: &ParamVector, batch: &[usize]) -> (f64, ParamVector);

    fn minibatch_grad(&self, theta: &ParamVector, batch: &[usize]) -> ParamVector {
        self.minibatch_loss_grad(theta, batch).1
    }

    fn optimum(&self) -> Option<ParamVector> {
        None
    }

    /// Gradient of `log p(t_i | x_i, theta)` at the observed target.
    fn loglik_grad_sample(&self, _theta: &ParamVector, _sample: usize) -> Option<ParamVector> {
        None
    }

    fn hessian(&self, _theta: &ParamVector) -> Option<DenseMatrix> {
        None
    }

    fn evaluate(&self, theta: &ParamVector) -> Eval {
        Eval {
            loss: self.loss(theta),
            error_rate: None,
        }
    }

    fn model(&self) -> Option<ModelRef<'_>> {
        None
    }

    /// Starting point drawn from `rng`.
    fn initial_point(&self, rng: &mut Rng) -> ParamVector {
        (0..self.dim()).map(|_| rng.normal()).collect()
    }

    /// Numeric precision of the gradient path, recorded in trace metadata.
    fn precision(&self) -> &'static str {
        "f64"
    }
}

/// Splits `0..n` into consecutive chunks of at most `batch` indices.
pub fn contiguous_batches(n: usize, batch: usize) -> Vec<Vec<usize>> {
    (0..n)
        .collect::<Vec<_>>()
        .chunks(batch.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

pub(crate) fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    DenseMatrix::from_row_major(rows, cols, data).expect("shape matches data")
}
