use super::{standard_normal_matrix, Eval, ModelRef, Problem, ProblemKind, Target};
use crate::linalg::{DenseMatrix, ParamVector, Rng};
use crate::{Error, Result};

/// Multinomial logistic regression without bias.
///
/// Parameters are the `K × p` weight matrix flattened row-major, so the
/// logit of class `k` is `θ[k*p..(k+1)*p] · x`.
#[derive(Debug, Clone)]
pub struct SoftmaxRegression {
    x: DenseMatrix,
    labels: Vec<usize>,
    classes: usize,
}

impl SoftmaxRegression {
    pub fn new(x: DenseMatrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Construction("need at least one class".into()));
        }
        if x.rows() != labels.len() {
            return Err(Error::Construction(format!(
                "design has {} rows but {} labels",
                x.rows(),
                labels.len()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::Construction("empty dataset".into()));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Data(format!(
                "label {l} at sample {i} outside [0, {classes})"
            )));
        }
        Ok(SoftmaxRegression { x, labels, classes })
    }

    /// Standard-normal features with labels drawn from a random teacher model.
    pub fn synthetic(n: usize, p: usize, classes: usize, rng: &mut Rng) -> Result<Self> {
        let x = standard_normal_matrix(n, p, rng);
        let teacher: ParamVector = (0..classes * p).map(|_| rng.normal()).collect();
        let labels = (0..n)
            .map(|i| {
                let probs = probabilities(&teacher, x.row(i), classes);
                rng.categorical(&probs)
            })
            .collect();
        Self::new(x, labels, classes)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> usize {
        self.x.cols()
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn probs(&self, theta: &ParamVector, i: usize) -> Vec<f64> {
        probabilities(theta, self.x.row(i), self.classes)
    }

    pub fn log_probs(&self, theta: &ParamVector, i: usize) -> Vec<f64> {
        log_probabilities(theta, self.x.row(i), self.classes)
    }

    /// `Σ_i log ŷ_{y_i}(x_i)`.
    pub fn log_likelihood(&self, theta: &ParamVector) -> f64 {
        (0..self.x.rows())
            .map(|i| self.log_probs(theta, i)[self.labels[i]])
            .sum()
    }

    /// Mean of `−Σ_k y_k log ŷ_k` with one-hot `y`.
    pub fn cross_entropy(&self, theta: &ParamVector) -> f64 {
        let total: f64 = (0..self.x.rows())
            .map(|i| {
                let lp = self.log_probs(theta, i);
                -(0..self.classes)
                    .map(|k| if k == self.labels[i] { lp[k] } else { 0.0 })
                    .sum::<f64>()
            })
            .sum();
        total / self.x.rows() as f64
    }

    pub fn loglik(&self, theta: &ParamVector, i: usize, target: Target) -> f64 {
        self.log_probs(theta, i)[class_of(target)]
    }

    /// `(e_k − ŷ) ⊗ x_i`.
    pub fn loglik_grad(&self, theta: &ParamVector, i: usize, target: Target) -> ParamVector {
        let k = class_of(target);
        let probs = self.probs(theta, i);
        let xi = self.x.row(i);
        let p = xi.len();
        let mut g = ParamVector::zeros(self.classes * p);
        for (c, &pc) in probs.iter().enumerate() {
            let coef = if c == k { 1.0 - pc } else { -pc };
            for (gj, &xj) in g.as_mut_slice()[c * p..(c + 1) * p].iter_mut().zip(xi) {
                *gj = coef * xj;
            }
        }
        g
    }

    pub fn sample_target(&self, theta: &ParamVector, i: usize, rng: &mut Rng) -> Target {
        Target::Class(rng.categorical(&self.probs(theta, i)))
    }

    pub fn observed_target(&self, i: usize) -> Target {
        Target::Class(self.labels[i])
    }

    pub fn error_rate(&self, theta: &ParamVector) -> f64 {
        let wrong = (0..self.x.rows())
            .filter(|&i| argmax(&self.log_probs(theta, i)) != self.labels[i])
            .count();
        wrong as f64 / self.x.rows() as f64
    }

    /// Mean KL divergence `(1/N) Σ_i KL(p_θ(·|x_i) ‖ p_{θ'}(·|x_i))`.
    pub fn mean_kl(&self, theta: &ParamVector, other: &ParamVector) -> f64 {
        let total: f64 = (0..self.x.rows())
            .map(|i| {
                let lp = self.log_probs(theta, i);
                let lq = self.log_probs(other, i);
                lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum::<f64>()
            })
            .sum();
        total / self.x.rows() as f64
    }

    fn batch_loss_grad(&self, theta: &ParamVector, batch: &[usize]) -> (f64, ParamVector) {
        let p = self.x.cols();
        let mut g = ParamVector::zeros(self.dim());
        let mut loss = 0.0;
        for &i in batch {
            let lp = self.log_probs(theta, i);
            let y = self.labels[i];
            loss -= lp[y];
            let xi = self.x.row(i);
            for (c, &l) in lp.iter().enumerate() {
                let coef = l.exp() - if c == y { 1.0 } else { 0.0 };
                for (gj, &xj) in g.as_mut_slice()[c * p..(c + 1) * p].iter_mut().zip(xi) {
                    *gj += coef * xj;
                }
            }
        }
        let inv = 1.0 / batch.len() as f64;
        (loss * inv, g.scale(inv))
    }
}

fn class_of(target: Target) -> usize {
    match target {
        Target::Class(k) => k,
        Target::Real(_) => panic!("softmax targets are class indices"),
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

fn log_probabilities(theta: &ParamVector, x: &[f64], classes: usize) -> Vec<f64> {
    let p = x.len();
    let logits: Vec<f64> = (0..classes)
        .map(|k| {
            theta.as_slice()[k * p..(k + 1) * p]
                .iter()
                .zip(x)
                .map(|(w, xi)| w * xi)
                .sum()
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

fn probabilities(theta: &ParamVector, x: &[f64], classes: usize) -> Vec<f64> {
    log_probabilities(theta, x, classes)
        .into_iter()
        .map(f64::exp)
        .collect()
}

impl Problem for SoftmaxRegression {
    fn kind(&self) -> ProblemKind {
        ProblemKind::SoftmaxRegression
    }

    fn dim(&self) -> usize {
        self.classes * self.x.cols()
    }

    fn num_samples(&self) -> usize {
        self.x.rows()
    }

    fn loss(&self, theta: &ParamVector) -> f64 {
        -self.log_likelihood(theta) / self.x.rows() as f64
    }

    fn grad(&self, theta: &ParamVector) -> ParamVector {
        let all: Vec<usize> = (0..self.x.rows()).collect();
        self.batch_loss_grad(theta, &all).1
    }

    fn minibatch_loss_grad(&self, theta: &ParamVector, batch: &[usize]) -> (f64, ParamVector) {
        self.batch_loss_grad(theta, batch)
    }

    fn loglik_grad_sample(&self, theta: &ParamVector, i: usize) -> Option<ParamVector> {
        Some(self.loglik_grad(theta, i, self.observed_target(i)))
    }

    /// `(1/N) Σ_i (diag ŷ − ŷŷᵀ) ⊗ x_i x_iᵀ`.
    fn hessian(&self, theta: &ParamVector) -> Option<DenseMatrix> {
        let p = self.x.cols();
        let d = self.dim();
        let mut h = DenseMatrix::zeros(d, d);
        for i in 0..self.x.rows() {
            let probs = self.probs(theta, i);
            let xi = self.x.row(i);
            for a in 0..self.classes {
                for b in 0..self.classes {
                    let c = if a == b { probs[a] } else { 0.0 } - probs[a] * probs[b];
                    for r in 0..p {
                        for s in 0..p {
                            h[(a * p + r, b * p + s)] += c * xi[r] * xi[s];
                        }
                    }
                }
            }
        }
        Some(h.scale(1.0 / self.x.rows() as f64))
    }

    fn evaluate(&self, theta: &ParamVector) -> Eval {
        Eval {
            loss: self.loss(theta),
            error_rate: Some(self.error_rate(theta)),
        }
    }

    fn model(&self) -> Option<ModelRef<'_>> {
        Some(ModelRef::Softmax(self))
    }
}
