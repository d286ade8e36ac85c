use crate::linalg::{DenseMatrix, ParamVector};
use crate::ngd::fisher_exact;
use crate::problems::{ModelRef, Problem, Target};
use crate::{Error, Result};

use super::rel_frobenius;

/// Tolerance when both sides have closed forms.
pub const FISHER_CLOSED_FORM_TOLERANCE: f64 = 1e-10;
/// Tolerance against the finite-difference Hessian.
pub const FISHER_FD_TOLERANCE: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct FisherIdentityReport {
    /// Relative Frobenius deviation at each parameter point.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl FisherIdentityReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

/// `−E_model[∇² log p]` averaged over the inputs.
///
/// Linear-Gaussian uses `β XᵀX / N`; softmax differentiates the score
/// numerically per class and weights by the model probabilities.
pub fn neg_expected_hessian(problem: &dyn Problem, theta: &ParamVector) -> Result<DenseMatrix> {
    let model = problem
        .model()
        .ok_or_else(|| Error::Capability(format!("{:?} has no conditional model", problem.kind())))?;
    match model {
        ModelRef::LinearGaussian(lg) => {
            let x = lg.design();
            let gram = x.transpose().matmul(x)?;
            Ok(gram.scale(lg.beta() / x.rows() as f64))
        }
        ModelRef::Softmax(sm) => {
            let d = problem.dim();
            let n = sm.design().rows();
            let mut out = DenseMatrix::zeros(d, d);
            for i in 0..n {
                let probs = sm.probs(theta, i);
                for (k, &pk) in probs.iter().enumerate() {
                    let score = |t: &ParamVector| sm.loglik_grad(t, i, Target::Class(k));
                    for j in 0..d {
                        let mut plus = theta.clone();
                        let mut minus = theta.clone();
                        plus[j] += FD_STEP;
                        minus[j] -= FD_STEP;
                        let gp = score(&plus);
                        let gm = score(&minus);
                        for r in 0..d {
                            let h = (gp[r] - gm[r]) / (2.0 * FD_STEP);
                            out[(r, j)] -= pk * h / n as f64;
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Compares [`fisher_exact`] with [`neg_expected_hessian`] at each point.
pub fn check_fisher_identity(
    problem: &dyn Problem,
    thetas: &[ParamVector],
) -> Result<FisherIdentityReport> {
    let tolerance = match problem.model() {
        Some(ModelRef::LinearGaussian(_)) => FISHER_CLOSED_FORM_TOLERANCE,
        Some(ModelRef::Softmax(_)) => FISHER_FD_TOLERANCE,
        None => {
            return Err(Error::Capability(format!(
                "{:?} has no conditional model",
                problem.kind()
            )))
        }
    };
    let mut deviations = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let f = fisher_exact(problem, theta)?;
        let h = neg_expected_hessian(problem, theta)?;
        deviations.push(rel_frobenius(&f.matrix, &h));
    }
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(FisherIdentityReport {
        deviations,
        max_deviation,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use crate::problems::{LinearGaussian, Quadratic, SoftmaxRegression};

    fn random_points(d: usize, count: usize, rng: &mut Rng) -> Vec<ParamVector> {
        (0..count)
            .map(|_| (0..d).map(|_| 0.5 * rng.normal()).collect())
            .collect()
    }

    #[test]
    fn linear_gaussian_closed_forms_agree() {
        let mut rng = Rng::new(11);
        let p = LinearGaussian::synthetic(30, 4, 2.0, 0.1, &mut rng).unwrap();
        let pts = random_points(4, 5, &mut rng);
        let r = check_fisher_identity(&p, &pts).unwrap();
        assert_eq!(r.deviations.len(), 5);
        assert!(r.passed(), "{}", r.max_deviation);
        assert_eq!(r.tolerance, FISHER_CLOSED_FORM_TOLERANCE);
    }

    #[test]
    fn softmax_matches_finite_differences() {
        let mut rng = Rng::new(12);
        let p = SoftmaxRegression::synthetic(25, 3, 3, &mut rng).unwrap();
        let pts = random_points(9, 3, &mut rng);
        let r = check_fisher_identity(&p, &pts).unwrap();
        assert!(r.passed(), "{}", r.max_deviation);
    }

    #[test]
    fn single_class_is_zero_on_both_sides() {
        let mut rng = Rng::new(13);
        let p = SoftmaxRegression::synthetic(10, 2, 1, &mut rng).unwrap();
        let theta = ParamVector::from([0.4, -1.0]);
        assert_eq!(neg_expected_hessian(&p, &theta).unwrap().frobenius_norm(), 0.0);
        let r = check_fisher_identity(&p, &[theta]).unwrap();
        assert_eq!(r.max_deviation, 0.0);
    }

    #[test]
    fn quadratic_has_no_model() {
        let q = Quadratic::diagonal(&[1.0]).unwrap();
        assert!(matches!(
            check_fisher_identity(&q, &[ParamVector::zeros(1)]),
            Err(Error::Capability(_))
        ));
    }
}
