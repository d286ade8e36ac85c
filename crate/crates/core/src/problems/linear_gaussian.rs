use std::f64::consts::PI;

use super::{standard_normal_matrix, ModelRef, Problem, ProblemKind, Target};
use crate::linalg::{Cholesky, DenseMatrix, ParamVector, Rng};
use crate::{Error, Result};

/// Linear regression under Gaussian noise of precision `beta`:
/// `t | x, w ~ N(w·x, 1/beta)`.
///
/// The loss is the mean square loss `(1/N) Σ (t_i − w·x_i)²`; the
/// unnormalized sum is available as [`LinearGaussian::sum_square_loss`].
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    x: DenseMatrix,
    t: ParamVector,
    beta: f64,
    optimum: Option<ParamVector>,
}

impl LinearGaussian {
    pub fn new(x: DenseMatrix, t: ParamVector, beta: f64) -> Result<Self> {
        if x.rows() != t.len() {
            return Err(Error::Construction(format!(
                "design has {} rows but {} targets",
                x.rows(),
                t.len()
            )));
        }
        if !(beta > 0.0) {
            return Err(Error::Construction(format!("precision must be positive, got {beta}")));
        }
        if x.rows() == 0 {
            return Err(Error::Construction("empty dataset".into()));
        }
        let optimum = least_squares(&x, &t);
        Ok(LinearGaussian {
            x,
            t,
            beta,
            optimum,
        })
    }

    /// Random design with standard-normal entries and targets from a random
    /// ground-truth weight plus Gaussian noise of standard deviation `noise_std`.
    pub fn synthetic(n: usize, p: usize, beta: f64, noise_std: f64, rng: &mut Rng) -> Result<Self> {
        let x = standard_normal_matrix(n, p, rng);
        let w: ParamVector = (0..p).map(|_| rng.normal()).collect();
        let mut t = x.matvec(&w)?;
        for i in 0..n {
            t[i] += noise_std * rng.normal();
        }
        Self::new(x, t, beta)
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn targets(&self) -> &ParamVector {
        &self.t
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when `XᵀX` is singular and no unique least-squares optimum exists.
    pub fn is_rank_deficient(&self) -> bool {
        self.optimum.is_none()
    }

    pub fn prediction(&self, w: &ParamVector, i: usize) -> f64 {
        self.x.row(i).iter().zip(w.iter()).map(|(a, b)| a * b).sum()
    }

    fn residual(&self, w: &ParamVector, i: usize) -> f64 {
        self.t[i] - self.prediction(w, i)
    }

    /// `Σ (t_i − w·x_i)²`.
    pub fn sum_square_loss(&self, w: &ParamVector) -> f64 {
        (0..self.x.rows()).map(|i| self.residual(w, i).powi(2)).sum()
    }

    /// Total log-likelihood `Σ log N(t_i | w·x_i, 1/beta)`.
    pub fn log_likelihood(&self, w: &ParamVector) -> f64 {
        (0..self.x.rows())
            .map(|i| self.loglik(w, i, self.observed_target(i)))
            .sum()
    }

    pub fn loglik(&self, w: &ParamVector, i: usize, target: Target) -> f64 {
        let Target::Real(t) = target else {
            panic!("linear gaussian targets are real");
        };
        let r = t - self.prediction(w, i);
        0.5 * self.beta.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * self.beta * r * r
    }

    /// `β (t − w·x_i) x_i`.
    pub fn loglik_grad(&self, w: &ParamVector, i: usize, target: Target) -> ParamVector {
        let Target::Real(t) = target else {
            panic!("linear gaussian targets are real");
        };
        let r = t - self.prediction(w, i);
        self.x.row(i).iter().map(|&xi| self.beta * r * xi).collect()
    }

    pub fn sample_target(&self, w: &ParamVector, i: usize, rng: &mut Rng) -> Target {
        Target::Real(self.prediction(w, i) + rng.normal() / self.beta.sqrt())
    }

    pub fn observed_target(&self, i: usize) -> Target {
        Target::Real(self.t[i])
    }

    fn batch_loss_grad(&self, w: &ParamVector, batch: &[usize]) -> (f64, ParamVector) {
        let mut g = ParamVector::zeros(self.dim());
        let mut loss = 0.0;
        for &i in batch {
            let r = self.residual(w, i);
            loss += r * r;
            for (gj, &xj) in g.as_mut_slice().iter_mut().zip(self.x.row(i)) {
                *gj -= 2.0 * r * xj;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        (loss * inv, g.scale(inv))
    }
}

fn least_squares(x: &DenseMatrix, t: &ParamVector) -> Option<ParamVector> {
    let xt = x.transpose();
    let gram = xt.matmul(x).ok()?;
    let rhs = xt.matvec(t).ok()?;
    let chol = Cholesky::new(&gram).ok()?;
    // A tiny pivot relative to the largest diagonal entry means numerical rank loss.
    let l = chol.factor();
    let max_diag = (0..gram.rows()).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    let min_pivot = (0..l.rows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-12 * max_diag {
        return None;
    }
    chol.solve(&rhs).ok()
}

impl Problem for LinearGaussian {
    fn kind(&self) -> ProblemKind {
        ProblemKind::LinearGaussian
    }

    fn dim(&self) -> usize {
        self.x.cols()
    }

    fn num_samples(&self) -> usize {
        self.x.rows()
    }

    fn loss(&self, w: &ParamVector) -> f64 {
        self.sum_square_loss(w) / self.x.rows() as f64
    }

    fn grad(&self, w: &ParamVector) -> ParamVector {
        let all: Vec<usize> = (0..self.x.rows()).collect();
        self.batch_loss_grad(w, &all).1
    }

    fn minibatch_loss_grad(&self, w: &ParamVector, batch: &[usize]) -> (f64, ParamVector) {
        self.batch_loss_grad(w, batch)
    }

    fn optimum(&self) -> Option<ParamVector> {
        self.optimum.clone()
    }

    fn loglik_grad_sample(&self, w: &ParamVector, i: usize) -> Option<ParamVector> {
        Some(self.loglik_grad(w, i, self.observed_target(i)))
    }

    fn hessian(&self, _w: &ParamVector) -> Option<DenseMatrix> {
        let xt = self.x.transpose();
        Some(xt.matmul(&self.x).ok()?.scale(2.0 / self.x.rows() as f64))
    }

    fn model(&self) -> Option<ModelRef<'_>> {
        Some(ModelRef::LinearGaussian(self))
    }
}
