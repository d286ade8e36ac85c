use crate::linalg::ParamVector;
use crate::optimizers::{Method, Optimizer, OptimizerConfig};
use crate::problems::Problem;
use crate::{Error, Result};

pub const NAG_TOLERANCE: f64 = 1e-9;
const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub steps: usize,
    pub max_rel_deviation: f64,
    /// `‖θ̂_i − φ_i‖ / (1 + ‖θ̂_i‖)` for `i = 1..=steps`.
    pub deviations: Vec<f64>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.max_rel_deviation <= NAG_TOLERANCE
    }
}

/// Runs look-ahead NAG `(θ_i, d_i)` and the gradient-difference form `φ_i`
/// from the same start, and compares `φ_i` with `θ̂_i = θ_i − ηβ d_i`.
pub fn check_nag_equivalence(
    problem: &dyn Problem,
    config: &OptimizerConfig,
    theta0: &ParamVector,
    steps: usize,
) -> Result<EquivalenceReport> {
    let dim = problem.dim();
    if theta0.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: theta0.len(),
        });
    }
    let mut nag = Optimizer::new(Method::Nag, *config, dim)?;
    let mut equiv = Optimizer::new(Method::NagEquiv, *config, dim)?;
    let mut theta = theta0.clone();
    let mut phi = theta0.clone();
    let shift = config.eta * config.beta;
    let mut deviations = Vec::with_capacity(steps);
    for step in 1..=steps {
        let diverged = |e: Error, norm: f64| match e {
            Error::NonFinite(_) => Error::Divergence { step, norm },
            other => other,
        };
        nag.step(&mut theta, |x| problem.grad(x))
            .map_err(|e| diverged(e, f64::INFINITY))?;
        equiv
            .step(&mut phi, |x| problem.grad(x))
            .map_err(|e| diverged(e, f64::INFINITY))?;
        let norm = theta.norm().max(phi.norm());
        if norm > DIVERGENCE_NORM {
            return Err(Error::Divergence { step, norm });
        }
        let hatted: ParamVector = theta
            .iter()
            .zip(nag.state().d.iter())
            .map(|(t, d)| t - shift * d)
            .collect();
        let dev = hatted.sub(&phi)?.norm() / (1.0 + hatted.norm());
        deviations.push(dev);
    }
    let max_rel_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(EquivalenceReport {
        steps,
        max_rel_deviation,
        deviations,
    })
}
