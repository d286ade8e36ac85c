use serde::Serialize;

use crate::linalg::{solve_spd, ParamVector};
use crate::optimizers::{Method, Optimizer, OptimizerConfig};
use crate::problems::Problem;
use crate::{Error, Result};

/// `R(T)/√T` at the largest horizon may exceed its value at the smallest by at most 5%.
pub const REGRET_SLACK: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaStarSource {
    ClosedForm,
    HighPrecisionSolve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub horizons: Vec<usize>,
    pub regret: Vec<f64>,
    /// `R(T) / √T`.
    pub normalized: Vec<f64>,
    pub theta_star_source: ThetaStarSource,
    /// Per coordinate: whether `G_t` never increased over the run.
    pub gt_monotone: Vec<bool>,
    /// Largest observed `‖θ_t − θ*‖`, the bound `D` measured after the fact.
    pub max_distance: f64,
    pub regret_nondecreasing: bool,
}

impl RegretReport {
    /// Last normalized regret divided by the first.
    pub fn growth_ratio(&self) -> f64 {
        match (self.normalized.first(), self.normalized.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            (Some(_), Some(&b)) if b == 0.0 => 1.0,
            _ => f64::INFINITY,
        }
    }

    pub fn passed(&self) -> bool {
        self.regret_nondecreasing && self.growth_ratio() <= REGRET_SLACK
    }
}

/// Newton iterations to gradient norm `tol` using the problem's Hessian.
pub fn newton_solve(problem: &dyn Problem, start: &ParamVector, tol: f64) -> Result<ParamVector> {
    let mut theta = start.clone();
    for _ in 0..100 {
        let g = problem.grad(&theta);
        if g.norm() <= tol {
            return Ok(theta);
        }
        let h = problem
            .hessian(&theta)
            .ok_or_else(|| Error::Capability("no Hessian for a Newton solve".into()))?;
        let step = solve_spd(&h, &g)
            .map_err(|e| Error::Capability(format!("Newton solve for the optimum failed: {e}")))?;
        theta = theta.sub(&step)?;
    }
    let g = problem.grad(&theta);
    if g.norm() <= tol {
        Ok(theta)
    } else {
        Err(Error::Capability(format!(
            "Newton solve stalled at gradient norm {:e}",
            g.norm()
        )))
    }
}

/// Runs AdaSqrt on a convex full-batch problem and accumulates
/// `R(T) = Σ_{t=1}^{T} f(θ_t) − f(θ*)`, where `θ_1 = theta0` and `θ_t` is the
/// iterate at which the `t`-th gradient is taken.
pub fn check_regret_bound(
    problem: &dyn Problem,
    config: &OptimizerConfig,
    theta0: &ParamVector,
    horizons: &[usize],
) -> Result<RegretReport> {
    let mut horizons = horizons.to_vec();
    horizons.sort_unstable();
    horizons.dedup();
    let max_t = *horizons
        .last()
        .ok_or_else(|| Error::Argument("no horizons given".into()))?;
    if horizons[0] == 0 {
        return Err(Error::Argument("horizons must be positive".into()));
    }
    let (theta_star, source) = match problem.optimum() {
        Some(t) => (t, ThetaStarSource::ClosedForm),
        None => (
            newton_solve(problem, theta0, 1e-12)?,
            ThetaStarSource::HighPrecisionSolve,
        ),
    };
    let f_star = problem.loss(&theta_star);

    let dim = problem.dim();
    let mut opt = Optimizer::new(Method::AdaSqrt, *config, dim)?;
    let mut theta = theta0.clone();
    let mut total = 0.0;
    let mut regret = Vec::with_capacity(horizons.len());
    let mut next = horizons.iter().peekable();
    let mut prev_rates: Option<ParamVector> = None;
    let mut gt_monotone = vec![true; dim];
    let mut max_distance: f64 = 0.0;

    for t in 1..=max_t {
        total += problem.loss(&theta) - f_star;
        max_distance = max_distance.max(theta.sub(&theta_star)?.norm());
        if next.peek() == Some(&&t) {
            regret.push(total);
            next.next();
        }
        opt.step(&mut theta, |x| problem.grad(x))
            .map_err(|_| Error::Divergence {
                step: t,
                norm: f64::INFINITY,
            })?;
        let rates = opt.effective_rate()?.rates;
        if let Some(prev) = &prev_rates {
            for (i, flag) in gt_monotone.iter_mut().enumerate() {
                if rates[i] > prev[i] {
                    *flag = false;
                }
            }
        }
        prev_rates = Some(rates);
    }

    let normalized = horizons
        .iter()
        .zip(&regret)
        .map(|(&t, r)| r / (t as f64).sqrt())
        .collect();
    let regret_nondecreasing = regret.windows(2).all(|w| w[1] >= w[0]);
    Ok(RegretReport {
        horizons,
        regret,
        normalized,
        theta_star_source: source,
        gt_monotone,
        max_distance,
        regret_nondecreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use crate::problems::{Quadratic, SoftmaxRegression};

    fn cfg(eta: f64) -> OptimizerConfig {
        OptimizerConfig {
            eta,
            ..Default::default()
        }
    }

    #[test]
    fn scalar_quadratic_regret_is_bounded() {
        let q = Quadratic::diagonal(&[1.0]).unwrap();
        let r = check_regret_bound(&q, &cfg(0.5), &[2.0].into(), &[100, 1000, 10_000]).unwrap();
        assert_eq!(r.theta_star_source, ThetaStarSource::ClosedForm);
        assert!(r.regret_nondecreasing);
        assert!(r.passed(), "{:?}", r.normalized);
    }

    #[test]
    fn start_at_optimum_has_zero_regret() {
        let q = Quadratic::diagonal(&[1.0, 4.0]).unwrap();
        let r = check_regret_bound(&q, &cfg(0.5), &ParamVector::zeros(2), &[10, 100]).unwrap();
        assert!(r.regret.iter().all(|&v| v == 0.0));
        assert!(r.passed());
    }

    #[test]
    fn unsolvable_optimum_is_a_capability_error() {
        let mut rng = Rng::new(2);
        // Shifting all class weights equally leaves softmax unchanged, so the Hessian is singular.
        let p = SoftmaxRegression::synthetic(40, 2, 2, &mut rng).unwrap();
        let theta0 = ParamVector::zeros(p.dim());
        assert!(matches!(
            check_regret_bound(&p, &cfg(0.1), &theta0, &[10]),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn newton_reaches_quadratic_optimum() {
        let a = crate::DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let q = Quadratic::new(a, [1.0, 1.0].into()).unwrap();
        let x = newton_solve(&q, &[5.0, -7.0].into(), 1e-12).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-12 && (x[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_horizons() {
        let q = Quadratic::diagonal(&[1.0]).unwrap();
        assert!(check_regret_bound(&q, &cfg(0.5), &[1.0].into(), &[]).is_err());
        assert!(check_regret_bound(&q, &cfg(0.5), &[1.0].into(), &[0, 5]).is_err());
    }
}
