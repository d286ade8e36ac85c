use crate::linalg::ParamVector;
use crate::ngd::fisher_exact;
use crate::problems::SoftmaxRegression;
use crate::{Error, Result};

/// Absolute tolerance for models where the expansion is exact.
pub const KL_EXACT_TOLERANCE: f64 = 1e-12;
/// Minimum error reduction per halving of `‖Δ‖` (third order would give 8).
pub const KL_MIN_RATIO: f64 = 6.0;
const SKIP_BELOW: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
pub enum KlModel<'a> {
    /// `N(μ, σ²)` with known `σ`, parameterized by `μ`.
    GaussianMean { sigma: f64 },
    Softmax(&'a SoftmaxRegression),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlTaylorReport {
    pub magnitudes: Vec<f64>,
    pub kl: Vec<f64>,
    /// `½ ΔᵀFΔ`.
    pub quadratic: Vec<f64>,
    /// `|KL − ½ΔᵀFΔ|`.
    pub errors: Vec<f64>,
    /// Error ratios between consecutive magnitudes whose errors are both above the noise floor.
    pub ratios: Vec<f64>,
    pub exact: bool,
}

impl KlTaylorReport {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self) -> bool {
        if self.exact {
            self.max_error() <= KL_EXACT_TOLERANCE
        } else {
            !self.ratios.is_empty() && self.min_ratio() >= KL_MIN_RATIO
        }
    }
}

/// Evaluates `KL(p_θ ‖ p_{θ+Δ})` against `½ΔᵀF_θΔ` along `direction`,
/// rescaled to each entry of `magnitudes`.
pub fn check_kl_taylor(
    model: KlModel<'_>,
    theta: &ParamVector,
    direction: &ParamVector,
    magnitudes: &[f64],
) -> Result<KlTaylorReport> {
    if theta.len() != direction.len() {
        return Err(Error::Dimension {
            expected: theta.len(),
            got: direction.len(),
        });
    }
    let norm = direction.norm();
    let unit = if norm > 0.0 {
        direction.scale(1.0 / norm)
    } else {
        direction.clone()
    };
    let fisher = match model {
        KlModel::GaussianMean { sigma } => {
            if !(sigma > 0.0) || theta.len() != 1 {
                return Err(Error::Argument(
                    "Gaussian mean model needs one parameter and positive sigma".into(),
                ));
            }
            None
        }
        KlModel::Softmax(sm) => Some(fisher_exact(sm, theta)?.matrix),
    };

    let mut kl = Vec::new();
    let mut quadratic = Vec::new();
    let mut errors = Vec::new();
    for &m in magnitudes {
        let delta = unit.scale(m);
        let shifted = theta.add(&delta)?;
        let (k, q) = match (model, &fisher) {
            (KlModel::GaussianMean { sigma }, _) => {
                let (mu1, mu2) = (theta[0], shifted[0]);
                let s2 = sigma * sigma;
                let k = (s2 + (mu1 - mu2).powi(2)) / (2.0 * s2) - 0.5;
                (k, 0.5 * delta[0] * delta[0] / s2)
            }
            (KlModel::Softmax(sm), Some(f)) => {
                (sm.mean_kl(theta, &shifted), 0.5 * f.quad_form(&delta)?)
            }
            (KlModel::Softmax(_), None) => unreachable!("softmax Fisher computed above"),
        };
        kl.push(k);
        quadratic.push(q);
        errors.push((k - q).abs());
    }
    let ratios = errors
        .windows(2)
        .filter(|w| w[0] >= SKIP_BELOW && w[1] >= SKIP_BELOW)
        .map(|w| w[0] / w[1])
        .collect();
    Ok(KlTaylorReport {
        magnitudes: magnitudes.to_vec(),
        kl,
        quadratic,
        errors,
        ratios,
        exact: matches!(model, KlModel::GaussianMean { .. }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    #[test]
    fn gaussian_mean_is_exact() {
        let r = check_kl_taylor(
            KlModel::GaussianMean { sigma: 0.7 },
            &[0.3].into(),
            &[1.0].into(),
            &[1.0, 0.5, 0.25, 0.125],
        )
        .unwrap();
        // Δ²/(2σ²) at Δ = 1
        assert!((r.kl[0] - 1.0 / (2.0 * 0.49)).abs() < 1e-14);
        assert!(r.passed(), "{}", r.max_error());
    }

    #[test]
    fn softmax_error_is_third_order() {
        let mut rng = Rng::new(21);
        let sm = SoftmaxRegression::synthetic(30, 3, 3, &mut rng).unwrap();
        let theta: ParamVector = (0..9).map(|_| rng.normal()).collect();
        let dir: ParamVector = (0..9).map(|_| rng.normal()).collect();
        let r = check_kl_taylor(KlModel::Softmax(&sm), &theta, &dir, &[1e-2, 5e-3]).unwrap();
        assert_eq!(r.ratios.len(), 1);
        assert!(r.ratios[0] >= KL_MIN_RATIO, "{:?}", r.ratios);
        assert!(r.passed());
    }

    #[test]
    fn zero_shift_gives_zero() {
        let mut rng = Rng::new(22);
        let sm = SoftmaxRegression::synthetic(10, 2, 3, &mut rng).unwrap();
        let theta = ParamVector::zeros(6);
        let r = check_kl_taylor(KlModel::Softmax(&sm), &theta, &ParamVector::zeros(6), &[0.0])
            .unwrap();
        assert_eq!(r.kl[0], 0.0);
        assert_eq!(r.quadratic[0], 0.0);
        assert!(r.ratios.is_empty());
    }

    #[test]
    fn rejects_bad_gaussian_setup() {
        let model = KlModel::GaussianMean { sigma: 0.0 };
        assert!(check_kl_taylor(model, &[0.0].into(), &[1.0].into(), &[1.0]).is_err());
    }
}
