use std::f64::consts::PI;

use crate::linalg::{ParamVector, Rng};
use crate::problems::{LinearGaussian, Problem};

pub const MLE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MleReport {
    /// `log p(t | X, w) + (β/2) Σ(t_i − w·x_i)²` at each sampled `w`.
    pub values: Vec<f64>,
    pub max_pairwise_difference: f64,
    /// Distance of the common value from `(N/2) log β − (N/2) log 2π`.
    pub constant_error: f64,
}

impl MleReport {
    pub fn passed(&self) -> bool {
        self.max_pairwise_difference <= MLE_TOLERANCE && self.constant_error <= MLE_TOLERANCE
    }
}

/// Checks that the log-likelihood and the scaled square loss differ by a
/// constant at `points` random weights.
pub fn check_mle_squareloss(problem: &LinearGaussian, points: usize, rng: &mut Rng) -> MleReport {
    let beta = problem.beta();
    let n = problem.num_samples() as f64;
    let values: Vec<f64> = (0..points)
        .map(|_| {
            let w: ParamVector = (0..problem.dim()).map(|_| 2.0 * rng.normal()).collect();
            problem.log_likelihood(&w) + 0.5 * beta * problem.sum_square_loss(&w)
        })
        .collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let expected = 0.5 * n * beta.ln() - 0.5 * n * (2.0 * PI).ln();
    let constant_error = values
        .iter()
        .map(|v| (v - expected).abs())
        .fold(0.0, f64::max);
    MleReport {
        max_pairwise_difference: if values.is_empty() { 0.0 } else { max - min },
        values,
        constant_error,
    }
}
