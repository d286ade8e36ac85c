//! Fisher information matrices and natural gradient descent.
//!
//! All Fisher matrices are averages over the dataset (not sums), matching the
//! mean-normalised losses in [`crate::problems`]. The exact Fisher takes the
//! expectation over the model's own output distribution with inputs fixed to
//! the dataset; the empirical Fisher uses the observed targets instead.

use serde::{Deserialize, Serialize};

use crate::linalg::{Cholesky, DenseMatrix, ParamVector, Rng};
use crate::problems::{ModelRef, Problem};
use crate::{Error, Result};

pub const DEFAULT_DAMPING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherKind {
    ExactModel,
    MonteCarloModel,
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub matrix: DenseMatrix,
    pub kind: FisherKind,
    /// Ridge `λ` added to the diagonal before solving.
    pub damping: f64,
}

impl FisherMatrix {
    pub fn new(matrix: DenseMatrix, kind: FisherKind) -> Self {
        FisherMatrix {
            matrix,
            kind,
            damping: DEFAULT_DAMPING,
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `F + λI`.
    pub fn damped(&self) -> DenseMatrix {
        let mut m = self.matrix.clone();
        m.add_to_diagonal(self.damping);
        m
    }

    /// `(F + λI)⁻¹ g`.
    pub fn natural_gradient(&self, grad: &ParamVector) -> Result<ParamVector> {
        Cholesky::new(&self.damped())?.solve(grad)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.matrix.symmetric_eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// Number of eigenvalues above `tol · λ_max`.
    pub fn numerical_rank(&self, tol: f64) -> Result<usize> {
        let ev = self.matrix.symmetric_eigenvalues()?;
        let max = ev.last().copied().unwrap_or(0.0).max(0.0);
        Ok(ev.iter().filter(|&&e| e > tol * max && e > 0.0).count())
    }
}

fn require_model(problem: &dyn Problem) -> Result<ModelRef<'_>> {
    problem.model().ok_or_else(|| {
        Error::Capability(format!(
            "no closed-form conditional model for {:?}",
            problem.kind()
        ))
    })
}

/// Exact model Fisher `(1/N) Σ_i E_{t∼p(·|x_i,θ)}[∇log p ∇log pᵀ]`.
///
/// Linear-Gaussian: `β XᵀX / N`. Softmax: explicit sum over all `K` classes.
pub fn fisher_exact(problem: &dyn Problem, theta: &ParamVector) -> Result<FisherMatrix> {
    let d = problem.dim();
    let mut f = DenseMatrix::zeros(d, d);
    match require_model(problem)? {
        ModelRef::LinearGaussian(lg) => {
            let x = lg.design();
            for i in 0..x.rows() {
                f.rank1_update(lg.beta(), x.row(i), x.row(i));
            }
            f = f.scale(1.0 / x.rows() as f64);
        }
        ModelRef::Softmax(sm) => {
            let n = sm.design().rows();
            for i in 0..n {
                let probs = sm.probs(theta, i);
                for (k, &pk) in probs.iter().enumerate() {
                    let g = sm.loglik_grad(theta, i, crate::problems::Target::Class(k));
                    f.rank1_update(pk / n as f64, g.as_slice(), g.as_slice());
                }
            }
        }
    }
    Ok(FisherMatrix::new(f, FisherKind::ExactModel))
}

/// Monte Carlo model Fisher: each draw picks a sample uniformly, samples a
/// target from the model at `theta`, and accumulates the score outer product.
pub fn fisher_monte_carlo(
    problem: &dyn Problem,
    theta: &ParamVector,
    n_draws: usize,
    rng: &mut Rng,
) -> Result<FisherMatrix> {
    if n_draws == 0 {
        return Err(Error::Argument("n_draws must be positive".into()));
    }
    let model = require_model(problem)?;
    let d = problem.dim();
    let n = problem.num_samples();
    let mut f = DenseMatrix::zeros(d, d);
    let w = 1.0 / n_draws as f64;
    for _ in 0..n_draws {
        let i = rng.below(n);
        let g = match model {
            ModelRef::LinearGaussian(lg) => {
                let t = lg.sample_target(theta, i, rng);
                lg.loglik_grad(theta, i, t)
            }
            ModelRef::Softmax(sm) => {
                let t = sm.sample_target(theta, i, rng);
                sm.loglik_grad(theta, i, t)
            }
        };
        f.rank1_update(w, g.as_slice(), g.as_slice());
    }
    Ok(FisherMatrix::new(f, FisherKind::MonteCarloModel))
}

/// Empirical Fisher `(1/N) Σ_i ∇log p(t_i|x_i) ∇log p(t_i|x_i)ᵀ` at the observed targets.
pub fn fisher_empirical(problem: &dyn Problem, theta: &ParamVector) -> Result<FisherMatrix> {
    let d = problem.dim();
    let n = problem.num_samples();
    let mut f = DenseMatrix::zeros(d, d);
    for i in 0..n {
        let g = problem.loglik_grad_sample(theta, i).ok_or_else(|| {
            Error::Capability(format!("{:?} has no per-sample log-likelihood", problem.kind()))
        })?;
        f.rank1_update(1.0 / n as f64, g.as_slice(), g.as_slice());
    }
    Ok(FisherMatrix::new(f, FisherKind::Empirical))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NgdConfig {
    pub eta: f64,
    pub damping: f64,
}

impl Default for NgdConfig {
    fn default() -> Self {
        NgdConfig {
            eta: 0.1,
            damping: DEFAULT_DAMPING,
        }
    }
}

/// `θ − η (F + λI)⁻¹ g` for a given Fisher matrix and gradient.
pub fn natural_step(
    fisher: &FisherMatrix,
    theta: &ParamVector,
    grad: &ParamVector,
    eta: f64,
) -> Result<ParamVector> {
    let dir = fisher.natural_gradient(grad).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::NonFinite(format!(
            "Fisher matrix singular even with damping {:e}: {e}",
            fisher.damping
        )),
        other => other,
    })?;
    theta.sub(&dir.scale(eta))
}

/// One natural gradient step with the exact Fisher and full-batch gradient.
pub fn step_ngd(problem: &dyn Problem, theta: &ParamVector, config: &NgdConfig) -> Result<ParamVector> {
    let fisher = fisher_exact(problem, theta)?.with_damping(config.damping);
    natural_step(&fisher, theta, &problem.grad(theta), config.eta)
}
