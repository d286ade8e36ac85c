//! Standard fixtures for every check.

use std::fmt;
use std::str::FromStr;

use super::{
    check_fisher_identity, check_kl_taylor, check_mle_squareloss, check_nag_equivalence,
    check_natural_gradient_direction, check_natural_gradient_direction_for, check_regret_bound,
    CheckResult, KlModel, DIRECTION_TOLERANCE_DEG, KL_EXACT_TOLERANCE, KL_MIN_RATIO,
    MLE_TOLERANCE, NAG_TOLERANCE, REGRET_SLACK,
};
use crate::linalg::{DenseMatrix, ParamVector, Rng};
use crate::ngd::{step_ngd, NgdConfig};
use crate::optimizers::OptimizerConfig;
use crate::problems::{LinearGaussian, Problem, Quadratic, SoftmaxRegression};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_160_901;
/// Distance from the least-squares optimum after one natural gradient step.
pub const NGD_STEP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckName {
    NagEquiv,
    Regret,
    Fisher,
    Kl,
    NgdDirection,
    Mle,
    NgdStep,
    All,
}

impl CheckName {
    pub const INDIVIDUAL: [CheckName; 7] = [
        CheckName::NagEquiv,
        CheckName::Regret,
        CheckName::Fisher,
        CheckName::Kl,
        CheckName::NgdDirection,
        CheckName::Mle,
        CheckName::NgdStep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckName::NagEquiv => "nag_equiv",
            CheckName::Regret => "regret",
            CheckName::Fisher => "fisher",
            CheckName::Kl => "kl",
            CheckName::NgdDirection => "ngd_direction",
            CheckName::Mle => "mle",
            CheckName::NgdStep => "ngd_step",
            CheckName::All => "all",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::INDIVIDUAL
            .into_iter()
            .chain([CheckName::All])
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown check '{s}'")))
    }
}

/// Runs the selected check (or all of them) on the standard fixtures.
///
/// A check that errors out is reported as a failing row rather than aborting
/// the rest of the suite.
pub fn run_suite(which: CheckName, seed: u64) -> Vec<CheckResult> {
    let selected: Vec<CheckName> = match which {
        CheckName::All => CheckName::INDIVIDUAL.to_vec(),
        one => vec![one],
    };
    let mut rows = Vec::new();
    for check in selected {
        let rng = Rng::new(seed).substream(check as u64);
        let outcome = match check {
            CheckName::NagEquiv => nag_rows(rng),
            CheckName::Regret => regret_rows(),
            CheckName::Fisher => fisher_rows(rng),
            CheckName::Kl => kl_rows(rng),
            CheckName::NgdDirection => direction_rows(rng),
            CheckName::Mle => mle_rows(rng),
            CheckName::NgdStep => ngd_step_rows(rng),
            CheckName::All => unreachable!("expanded above"),
        };
        match outcome {
            Ok(r) => rows.extend(r),
            Err(e) => {
                let mut row = CheckResult::new(check.name(), &format!("error: {e}"), f64::NAN, f64::NAN, false);
                row.case = row.case.replace(',', ";");
                rows.push(row);
            }
        }
    }
    rows
}

fn random_point(d: usize, scale: f64, rng: &mut Rng) -> ParamVector {
    (0..d).map(|_| scale * rng.normal()).collect()
}

fn nag_rows(mut rng: Rng) -> Result<Vec<CheckResult>> {
    let well = Quadratic::new(
        DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]])?,
        [1.0, -1.0].into(),
    )?;
    let ill = Quadratic::diagonal(&[1.0, 1e4])?;
    let softmax = SoftmaxRegression::synthetic(60, 4, 3, &mut rng)?;
    let softmax_start = random_point(softmax.dim(), 0.5, &mut rng);
    let momentum = |eta| OptimizerConfig {
        eta,
        beta: 0.9,
        ..Default::default()
    };
    let cases: [(&str, &dyn Problem, OptimizerConfig, ParamVector); 3] = [
        ("quadratic_well_conditioned", &well, momentum(0.1), [3.0, -2.0].into()),
        ("quadratic_kappa_1e4", &ill, momentum(5e-5), [1.0, 1.0].into()),
        ("softmax_d12", &softmax, momentum(0.1), softmax_start),
    ];
    cases
        .into_iter()
        .map(|(name, problem, cfg, theta0)| {
            let r = check_nag_equivalence(problem, &cfg, &theta0, 1000)?;
            Ok(CheckResult::new(
                "nag_equiv",
                name,
                r.max_rel_deviation,
                NAG_TOLERANCE,
                r.passed(),
            ))
        })
        .collect()
}

fn regret_rows() -> Result<Vec<CheckResult>> {
    let horizons = [100, 1000, 10_000];
    let scalar = Quadratic::diagonal(&[1.0])?;
    let diag = Quadratic::diagonal(&[1.0, 10.0])?;
    let cfg = OptimizerConfig {
        eta: 0.5,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let cases: [(&str, &dyn Problem, ParamVector); 2] = [
        ("half_theta_squared", &scalar, [2.0].into()),
        ("diag_1_10", &diag, [2.0, -1.0].into()),
    ];
    for (name, problem, theta0) in cases {
        let r = check_regret_bound(problem, &cfg, &theta0, &horizons)?;
        rows.push(CheckResult::new(
            "regret",
            &format!("{name}/normalized_growth"),
            r.growth_ratio(),
            REGRET_SLACK,
            r.growth_ratio() <= REGRET_SLACK,
        ));
        rows.push(CheckResult::new(
            "regret",
            &format!("{name}/nondecreasing"),
            if r.regret_nondecreasing { 1.0 } else { 0.0 },
            1.0,
            r.regret_nondecreasing,
        ));
        let monotone = r.gt_monotone.iter().filter(|&&m| m).count() as f64 / r.gt_monotone.len() as f64;
        rows.push(CheckResult::informational(
            "regret",
            &format!("{name}/gt_monotone_fraction"),
            monotone,
        ));
        rows.push(CheckResult::informational(
            "regret",
            &format!("{name}/max_distance"),
            r.max_distance,
        ));
        let linear = OptimizerConfig {
            alpha_exponent: 1.0,
            ..cfg
        };
        let r1 = check_regret_bound(problem, &linear, &theta0, &horizons)?;
        rows.push(CheckResult::informational(
            "regret",
            &format!("{name}/alpha_linear_growth"),
            r1.growth_ratio(),
        ));
    }
    let at_optimum = check_regret_bound(&diag, &cfg, &ParamVector::zeros(2), &horizons)?;
    let total = at_optimum.regret.iter().copied().fold(0.0, f64::max);
    rows.push(CheckResult::new("regret", "start_at_optimum", total, 0.0, total == 0.0));
    Ok(rows)
}

fn fisher_rows(mut rng: Rng) -> Result<Vec<CheckResult>> {
    let lg = LinearGaussian::synthetic(50, 3, 2.0, 0.3, &mut rng)?;
    let sm = SoftmaxRegression::synthetic(40, 3, 3, &mut rng)?;
    let single = SoftmaxRegression::synthetic(10, 2, 1, &mut rng)?;
    let cases: [(&str, &dyn Problem); 3] = [
        ("linear_gaussian", &lg),
        ("softmax_k3", &sm),
        ("softmax_k1", &single),
    ];
    cases
        .into_iter()
        .map(|(name, problem)| {
            let points: Vec<ParamVector> = (0..5)
                .map(|_| random_point(problem.dim(), 0.5, &mut rng))
                .collect();
            let r = check_fisher_identity(problem, &points)?;
            Ok(CheckResult::new("fisher", name, r.max_deviation, r.tolerance, r.passed()))
        })
        .collect()
}

fn kl_rows(mut rng: Rng) -> Result<Vec<CheckResult>> {
    let gauss = check_kl_taylor(
        KlModel::GaussianMean { sigma: 0.7 },
        &[0.3].into(),
        &[1.0].into(),
        &[1.0, 0.5, 0.25, 0.125],
    )?;
    let sm = SoftmaxRegression::synthetic(40, 3, 3, &mut rng)?;
    let theta = random_point(sm.dim(), 1.0, &mut rng);
    let dir = random_point(sm.dim(), 1.0, &mut rng);
    let soft = check_kl_taylor(KlModel::Softmax(&sm), &theta, &dir, &[2e-2, 1e-2, 5e-3, 2.5e-3])?;
    Ok(vec![
        CheckResult::new(
            "kl",
            "gaussian_mean",
            gauss.max_error(),
            KL_EXACT_TOLERANCE,
            gauss.passed(),
        ),
        CheckResult::new(
            "kl",
            "softmax_min_halving_ratio",
            soft.min_ratio(),
            KL_MIN_RATIO,
            soft.passed() && soft.ratios.len() == 3,
        ),
    ])
}

fn direction_rows(mut rng: Rng) -> Result<Vec<CheckResult>> {
    let linear = check_natural_gradient_direction(
        &|x: &ParamVector| x[0] + x[1],
        &[1.0, 1.0].into(),
        &DenseMatrix::from_diag(&[1.0, 100.0]),
        &[0.2, -0.1].into(),
    )?;
    let lg = LinearGaussian::synthetic(20, 2, 1.5, 0.3, &mut rng)?;
    let theta = random_point(2, 1.0, &mut rng);
    let gauss = check_natural_gradient_direction_for(&lg, &theta)?;
    Ok(vec![
        CheckResult::new(
            "ngd_direction",
            "linear_loss_diag_1_100",
            linear.angle_deg,
            DIRECTION_TOLERANCE_DEG,
            linear.passed(),
        ),
        CheckResult::new(
            "ngd_direction",
            "linear_gaussian_2d",
            gauss.angle_deg,
            DIRECTION_TOLERANCE_DEG,
            gauss.passed() && !gauss.skipped,
        ),
    ])
}

fn mle_rows(mut rng: Rng) -> Result<Vec<CheckResult>> {
    let lg = LinearGaussian::synthetic(50, 4, 2.5, 0.5, &mut rng)?;
    let r = check_mle_squareloss(&lg, 5, &mut rng);
    let sm = SoftmaxRegression::synthetic(40, 3, 4, &mut rng)?;
    let theta = random_point(sm.dim(), 1.0, &mut rng);
    let nll = -sm.log_likelihood(&theta) / sm.num_samples() as f64;
    let ce_gap = (nll - sm.cross_entropy(&theta)).abs();
    Ok(vec![
        CheckResult::new(
            "mle",
            "linear_gaussian_pairwise",
            r.max_pairwise_difference,
            MLE_TOLERANCE,
            r.max_pairwise_difference <= MLE_TOLERANCE,
        ),
        CheckResult::new(
            "mle",
            "linear_gaussian_constant",
            r.constant_error,
            MLE_TOLERANCE,
            r.constant_error <= MLE_TOLERANCE,
        ),
        CheckResult::new(
            "mle",
            "softmax_nll_vs_cross_entropy",
            ce_gap,
            1e-12,
            ce_gap <= 1e-12,
        ),
    ])
}

fn ngd_step_rows(mut rng: Rng) -> Result<Vec<CheckResult>> {
    let beta = 2.0;
    let lg = LinearGaussian::synthetic(40, 3, beta, 0.2, &mut rng)?;
    let optimum = lg
        .optimum()
        .ok_or_else(|| Error::Capability("fixture design is rank deficient".into()))?;
    let cfg = NgdConfig {
        eta: beta / 2.0,
        damping: 0.0,
    };
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let theta0 = random_point(3, 3.0, &mut rng);
        let theta1 = step_ngd(&lg, &theta0, &cfg)?;
        worst = worst.max(theta1.sub(&optimum)?.norm());
    }
    Ok(vec![CheckResult::new(
        "ngd_step",
        "linear_gaussian_eta_half_beta",
        worst,
        NGD_STEP_TOLERANCE,
        worst <= NGD_STEP_TOLERANCE,
    )])
}
