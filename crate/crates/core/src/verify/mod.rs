//! Executable numerical checks.
//!
//! Each check returns a typed report with the measured deviation and the
//! pinned tolerance; [`suite`] runs the standard fixtures and flattens the
//! reports into [`CheckResult`] rows for the CLI and the acceptance tests.

mod direction;
mod fisher;
mod kl;
mod mle;
mod nag;
mod regret;
pub mod suite;

pub use direction::{
    check_natural_gradient_direction, check_natural_gradient_direction_for, DirectionReport,
    DIRECTION_TOLERANCE_DEG,
};
pub use fisher::{
    check_fisher_identity, neg_expected_hessian, FisherIdentityReport,
    FISHER_CLOSED_FORM_TOLERANCE, FISHER_FD_TOLERANCE,
};
pub use kl::{check_kl_taylor, KlModel, KlTaylorReport, KL_EXACT_TOLERANCE, KL_MIN_RATIO};
pub use mle::{check_mle_squareloss, MleReport, MLE_TOLERANCE};
pub use nag::{check_nag_equivalence, EquivalenceReport, NAG_TOLERANCE};
pub use regret::{check_regret_bound, newton_solve, RegretReport, ThetaStarSource, REGRET_SLACK};
pub use suite::{run_suite, CheckName, DEFAULT_SEED, NGD_STEP_TOLERANCE};

use std::fmt;

/// One pass/fail line.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub check: String,
    pub case: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Informational rows are reported but never fail a run.
    pub informational: bool,
}

impl CheckResult {
    pub fn new(check: &str, case: &str, measured: f64, threshold: f64, passed: bool) -> Self {
        CheckResult {
            check: check.to_string(),
            case: case.to_string(),
            measured,
            threshold,
            passed,
            informational: false,
        }
    }

    pub fn informational(check: &str, case: &str, measured: f64) -> Self {
        CheckResult {
            informational: true,
            ..Self::new(check, case, measured, f64::NAN, true)
        }
    }

    pub const CSV_HEADER: &'static str = "check,case,measured,threshold,passed,informational";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{:e},{},{}",
            self.check, self.case, self.measured, self.threshold, self.passed, self.informational
        )
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.informational, self.passed) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        write!(f, "{status} {}[{}] measured={:.3e}", self.check, self.case, self.measured)?;
        if !self.informational {
            write!(f, " threshold={:.3e}", self.threshold)?;
        }
        Ok(())
    }
}

/// Relative Frobenius deviation `‖a − b‖ / ‖b‖`, absolute when `b` is zero.
pub(crate) fn rel_frobenius(a: &crate::DenseMatrix, b: &crate::DenseMatrix) -> f64 {
    let diff = a.add_scaled(-1.0, b).expect("same shape").frobenius_norm();
    let scale = b.frobenius_norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
