use super::{Problem, ProblemKind};
use crate::linalg::{Cholesky, DenseMatrix, ParamVector};
use crate::{Error, Result};

/// `f(θ) = ½ θᵀAθ − bᵀθ` with SPD `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DenseMatrix,
    b: ParamVector,
    optimum: ParamVector,
}

impl Quadratic {
    pub fn new(a: DenseMatrix, b: ParamVector) -> Result<Self> {
        if !a.is_square() || a.rows() != b.len() {
            return Err(Error::Construction(format!(
                "quadratic needs square A matching b: A is {}x{}, b has {}",
                a.rows(),
                a.cols(),
                b.len()
            )));
        }
        if a.asymmetry() > 1e-12 * (1.0 + a.frobenius_norm()) {
            return Err(Error::Construction("A is not symmetric".into()));
        }
        let chol = Cholesky::new(&a)
            .map_err(|e| Error::Construction(format!("A is not positive definite: {e}")))?;
        let optimum = chol.solve(&b)?;
        Ok(Quadratic { a, b, optimum })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DenseMatrix::from_diag(diag), ParamVector::zeros(diag.len()))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn linear_term(&self) -> &ParamVector {
        &self.b
    }
}

impl Problem for Quadratic {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Quadratic
    }

    fn dim(&self) -> usize {
        self.b.len()
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn loss(&self, theta: &ParamVector) -> f64 {
        let ax = self.a.matvec(theta).expect("dimension");
        0.5 * ax.dot(theta).expect("dimension") - self.b.dot(theta).expect("dimension")
    }

    fn grad(&self, theta: &ParamVector) -> ParamVector {
        self.a.matvec(theta).expect("dimension").sub(&self.b).expect("dimension")
    }

    fn minibatch_loss_grad(&self, theta: &ParamVector, _batch: &[usize]) -> (f64, ParamVector) {
        (self.loss(theta), self.grad(theta))
    }

    fn optimum(&self) -> Option<ParamVector> {
        Some(self.optimum.clone())
    }

    fn hessian(&self, _theta: &ParamVector) -> Option<DenseMatrix> {
        Some(self.a.clone())
    }
}
