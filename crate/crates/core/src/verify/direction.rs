use std::f64::consts::PI;

use crate::linalg::{Cholesky, DenseMatrix, ParamVector};
use crate::ngd::fisher_exact;
use crate::problems::Problem;
use crate::{Error, Result};

pub const DIRECTION_TOLERANCE_DEG: f64 = 1.0;
const NUM_DIRECTIONS: usize = 10_000;
const RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionReport {
    /// Angle between the brute-force argmin and `−F⁻¹∇L` in the F metric, in degrees.
    pub angle_deg: f64,
    pub best_direction: ParamVector,
    pub natural_direction: ParamVector,
    pub directions: usize,
    /// Set when `∇L = 0`, where every direction is equally good.
    pub skipped: bool,
}

impl DirectionReport {
    pub fn passed(&self) -> bool {
        self.skipped || self.angle_deg <= DIRECTION_TOLERANCE_DEG
    }
}

fn f_angle(f: &DenseMatrix, a: &ParamVector, b: &ParamVector) -> Result<f64> {
    let fb = f.matvec(b)?;
    let cos = a.dot(&fb)? / (f.quad_form(a)?.sqrt() * f.quad_form(b)?.sqrt());
    Ok(cos.clamp(-1.0, 1.0).acos().to_degrees())
}

/// Searches `10⁴` directions of F-norm `1e-4` around `theta` for the one
/// minimizing `loss`, and compares it with the natural gradient direction.
pub fn check_natural_gradient_direction(
    loss: &dyn Fn(&ParamVector) -> f64,
    grad: &ParamVector,
    fisher: &DenseMatrix,
    theta: &ParamVector,
) -> Result<DirectionReport> {
    if theta.len() != 2 || grad.len() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: theta.len().max(grad.len()),
        });
    }
    if fisher.rows() != 2 || fisher.cols() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: fisher.rows(),
        });
    }
    let chol = Cholesky::new(fisher)?;
    let natural = chol.solve(grad)?.scale(-1.0);
    if grad.norm() == 0.0 {
        return Ok(DirectionReport {
            angle_deg: f64::NAN,
            best_direction: ParamVector::zeros(2),
            natural_direction: natural,
            directions: 0,
            skipped: true,
        });
    }

    let mut best = (f64::INFINITY, ParamVector::zeros(2));
    for k in 0..NUM_DIRECTIONS {
        let phi = 2.0 * PI * k as f64 / NUM_DIRECTIONS as f64;
        let c = ParamVector::from([phi.cos(), phi.sin()]);
        // dᵀFd = ε² when d = ε L⁻ᵀ c with F = LLᵀ and ‖c‖ = 1.
        let d = chol.solve_upper(&c)?.scale(RADIUS);
        let value = loss(&theta.add(&d)?);
        if value < best.0 {
            best = (value, d);
        }
    }
    let angle_deg = f_angle(fisher, &best.1, &natural)?;
    Ok(DirectionReport {
        angle_deg,
        best_direction: best.1,
        natural_direction: natural,
        directions: NUM_DIRECTIONS,
        skipped: false,
    })
}

/// [`check_natural_gradient_direction`] with the problem's exact Fisher.
pub fn check_natural_gradient_direction_for(
    problem: &dyn Problem,
    theta: &ParamVector,
) -> Result<DirectionReport> {
    let fisher = fisher_exact(problem, theta)?;
    check_natural_gradient_direction(
        &|x| problem.loss(x),
        &problem.grad(theta),
        &fisher.matrix,
        theta,
    )
}
