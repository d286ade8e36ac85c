//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use gradlab_core::harness::{
    resolve_mnist_dir, run_sweep, ExperimentConfig, OptimizerSpec, ProblemSpec,
    StepperName,
};
use gradlab_core::linalg::ParamVector;
use gradlab_core::ngd::{step_ngd, NgdConfig};
use gradlab_core::problems::{
    Dataset, LinearGaussian, MlpProblem, Precision, Quadratic, SoftmaxRegression, MNIST_LAYERS,
};
use gradlab_core::verify::{
    check_fisher_identity, check_kl_taylor, check_nag_equivalence,
    check_natural_gradient_direction, check_natural_gradient_direction_for, check_regret_bound,
    KlModel,
};
use gradlab_core::{DenseMatrix, Method, Optimizer, OptimizerConfig, Problem, Rng};

const SEED: u64 = 2024;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn criterion_1() -> Outcome {
    const TOL: f64 = 1e-9;
    const LIMIT_S: f64 = 5.0;
    let mut rng = Rng::new(SEED);
    let well = Quadratic::new(
        DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
        [1.0, -1.0].into(),
    )
    .unwrap();
    let ill = Quadratic::diagonal(&[1.0, 1e4]).unwrap();
    let softmax = SoftmaxRegression::synthetic(80, 5, 4, &mut rng).unwrap();
    let start = random_vector(softmax.dim(), 0.5, &mut rng);
    let cfg = |eta| OptimizerConfig {
        eta,
        beta: 0.9,
        ..Default::default()
    };
    let cases: [(&str, &dyn Problem, OptimizerConfig, ParamVector); 3] = [
        ("well-conditioned", &well, cfg(0.1), [3.0, -2.0].into()),
        ("kappa=1e4", &ill, cfg(5e-5), [1.0, 1.0].into()),
        ("softmax d=20", &softmax, cfg(0.1), start),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p, c, theta0) in cases {
        let t = Instant::now();
        let r = check_nag_equivalence(p, &c, &theta0, 1000).unwrap();
        let pass = r.max_rel_deviation <= TOL && within(t.elapsed(), LIMIT_S);
        ok &= pass;
        parts.push(format!("{name}: {:.2e} in {:.2}s", r.max_rel_deviation, t.elapsed().as_secs_f64()));
    }
    verdict(ok, format!("{} (tol {TOL:e}, 1000 steps)", parts.join("; ")))
}

fn criterion_2() -> Outcome {
    const LG_TOL: f64 = 1e-10;
    const SM_TOL: f64 = 1e-6;
    let t = Instant::now();
    let mut rng = Rng::new(SEED + 2);
    let lg = LinearGaussian::synthetic(60, 4, 2.5, 0.3, &mut rng).unwrap();
    let sm = SoftmaxRegression::synthetic(50, 3, 4, &mut rng).unwrap();
    let lg_pts: Vec<ParamVector> = (0..3).map(|_| random_vector(4, 1.0, &mut rng)).collect();
    let sm_pts: Vec<ParamVector> = (0..3).map(|_| random_vector(12, 0.7, &mut rng)).collect();
    let a = check_fisher_identity(&lg, &lg_pts).unwrap();
    let b = check_fisher_identity(&sm, &sm_pts).unwrap();
    let ok = a.max_deviation <= LG_TOL && b.max_deviation <= SM_TOL && within(t.elapsed(), 10.0);
    verdict(
        ok,
        format!(
            "linear_gaussian {:.2e} (tol {LG_TOL:e}); softmax {:.2e} (tol {SM_TOL:e}); {:.2}s",
            a.max_deviation,
            b.max_deviation,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    const EXACT_TOL: f64 = 1e-12;
    const MIN_RATIO: f64 = 6.0;
    let gauss = check_kl_taylor(
        KlModel::GaussianMean { sigma: 1.3 },
        &[-0.4].into(),
        &[1.0].into(),
        &[2.0, 1.0, 0.5, 0.25],
    )
    .unwrap();
    let mut rng = Rng::new(SEED + 3);
    let sm = SoftmaxRegression::synthetic(50, 3, 4, &mut rng).unwrap();
    let theta = random_vector(sm.dim(), 1.0, &mut rng);
    let dir = random_vector(sm.dim(), 1.0, &mut rng);
    let soft = check_kl_taylor(KlModel::Softmax(&sm), &theta, &dir, &[2e-2, 1e-2, 5e-3, 2.5e-3])
        .unwrap();
    let ok = gauss.max_error() <= EXACT_TOL && soft.ratios.len() == 3 && soft.min_ratio() >= MIN_RATIO;
    let ratios: Vec<String> = soft.ratios.iter().map(|r| format!("{r:.2}")).collect();
    verdict(
        ok,
        format!(
            "gaussian max error {:.1e} (tol {EXACT_TOL:e}); softmax halving ratios [{}] (min {MIN_RATIO})",
            gauss.max_error(),
            ratios.join(", ")
        ),
    )
}

fn criterion_4() -> Outcome {
    const TOL_DEG: f64 = 1.0;
    let linear = check_natural_gradient_direction(
        &|x: &ParamVector| x[0] + x[1],
        &[1.0, 1.0].into(),
        &DenseMatrix::from_diag(&[1.0, 100.0]),
        &[0.2, -0.1].into(),
    )
    .unwrap();
    let mut rng = Rng::new(SEED + 4);
    let lg = LinearGaussian::synthetic(30, 2, 1.5, 0.4, &mut rng).unwrap();
    let theta = random_vector(2, 1.0, &mut rng);
    let gauss = check_natural_gradient_direction_for(&lg, &theta).unwrap();
    let ok = !linear.skipped
        && !gauss.skipped
        && linear.angle_deg <= TOL_DEG
        && gauss.angle_deg <= TOL_DEG;
    verdict(
        ok,
        format!(
            "linear loss, F=diag(1,100): {:.3} deg; linear_gaussian: {:.3} deg (tol {TOL_DEG} deg, {} directions)",
            linear.angle_deg, gauss.angle_deg, gauss.directions
        ),
    )
}

fn criterion_5() -> Outcome {
    const TOL: f64 = 1e-8;
    let beta = 3.0;
    let mut rng = Rng::new(SEED + 5);
    let lg = LinearGaussian::synthetic(50, 4, beta, 0.5, &mut rng).unwrap();
    let optimum = lg.optimum().unwrap();
    let cfg = NgdConfig {
        eta: beta / 2.0,
        damping: 0.0,
    };
    let worst = (0..5)
        .map(|_| {
            let theta0 = random_vector(4, 5.0, &mut rng);
            step_ngd(&lg, &theta0, &cfg).unwrap().sub(&optimum).unwrap().norm()
        })
        .fold(0.0, f64::max);
    verdict(worst <= TOL, format!("max distance to optimum {worst:.2e} over 5 starts (tol {TOL:e})"))
}

fn criterion_6() -> Outcome {
    const SLACK: f64 = 1.05;
    let t = Instant::now();
    let cfg = OptimizerConfig {
        eta: 0.5,
        ..Default::default()
    };
    let horizons = [100, 1000, 10_000];
    let scalar = Quadratic::diagonal(&[1.0]).unwrap();
    let plane = Quadratic::new(
        DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap(),
        [1.0, 0.5].into(),
    )
    .unwrap();
    let cases: [(&str, &dyn Problem, ParamVector); 2] = [
        ("1/2 theta^2", &scalar, [2.0].into()),
        ("2-D quadratic", &plane, [2.0, -1.0].into()),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p, theta0) in cases {
        let r = check_regret_bound(p, &cfg, &theta0, &horizons).unwrap();
        let first = r.normalized[0];
        let last = *r.normalized.last().unwrap();
        ok &= last <= SLACK * first && r.regret_nondecreasing;
        parts.push(format!(
            "{name}: R/sqrT {first:.4} -> {last:.4}, nondecreasing={}",
            r.regret_nondecreasing
        ));
    }
    ok &= within(t.elapsed(), 5.0);
    verdict(ok, format!("{} (slack {SLACK}, {:.2}s)", parts.join("; "), t.elapsed().as_secs_f64()))
}

struct MnistPlan {
    method: Method,
    etas: &'static [f64],
    eps: Option<f64>,
}

const MNIST_PLANS: [MnistPlan; 3] = [
    MnistPlan {
        method: Method::Adam,
        etas: &[3e-4, 1e-3, 3e-3],
        eps: None,
    },
    MnistPlan {
        method: Method::Adagrad,
        etas: &[3e-3, 1e-2, 3e-2],
        eps: None,
    },
    MnistPlan {
        method: Method::AdaSqrt,
        etas: &[1e-3, 3e-3, 1e-2],
        eps: Some(0.1),
    },
];

fn mnist_config(plan: &MnistPlan, data_dir: &Path, epochs: usize, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSpec::MlpMnist {
            data_dir: Some(data_dir.to_path_buf()),
            precision: Precision::F32,
            train_limit: None,
            test_limit: None,
        },
        optimizer: OptimizerSpec {
            eps: plan.eps,
            ..OptimizerSpec::new(StepperName::FirstOrder(plan.method))
        },
        seed: SEED,
        steps: None,
        epochs: Some(epochs),
        batch_size: Some(50),
        eval_every: None,
        theta0: None,
        out_dir: out.to_path_buf(),
        timing: false,
    }
}

fn criterion_7() -> Outcome {
    const MAX_ERROR: f64 = 0.025;
    const MAX_GAP: f64 = 0.005;
    const EPOCHS: usize = 13;
    let data_dir = match resolve_mnist_dir(None) {
        Ok(d) if d.join("train-images-idx3-ubyte").exists() => d,
        Ok(d) => return Outcome::Skip(format!("MNIST not found in {}", d.display())),
        Err(e) => return Outcome::Skip(e.to_string()),
    };
    let scratch = tempfile::tempdir().unwrap();
    let mut finals = Vec::new();
    let mut parts = Vec::new();
    for plan in &MNIST_PLANS {
        let name = plan.method.name();
        let cfg = mnist_config(plan, &data_dir, EPOCHS, scratch.path());
        let sweep = match run_sweep(&cfg, plan.etas, &scratch.path().join(name)) {
            Ok(s) => s,
            Err(e) => return Outcome::Fail(format!("{name} sweep failed: {e}")),
        };
        let Some(best) = sweep.best else {
            return Outcome::Fail(format!("{name}: every learning rate diverged"));
        };
        let entry = &sweep.entries[best];
        let eta = entry.eta;
        let Some(err) = entry.final_error_rate else {
            return Outcome::Fail(format!("{name} at eta {eta:e}: no error rate"));
        };
        parts.push(format!("{name} eta={eta:e} error={:.2}%", 100.0 * err));
        finals.push(err);
    }
    let gap = finals[2] - finals[0];
    let ok = finals.iter().all(|&e| e <= MAX_ERROR) && gap <= MAX_GAP;
    verdict(
        ok,
        format!(
            "{}; adasqrt - adam = {:+.2} pp (limits {:.1}% and {:.1} pp)",
            parts.join(", "),
            100.0 * gap,
            100.0 * MAX_ERROR,
            100.0 * MAX_GAP
        ),
    )
}

fn iterate(method: Method, steps: usize, grad: fn(&ParamVector) -> ParamVector) -> f64 {
    let cfg = OptimizerConfig {
        eta: 0.1,
        beta: 0.9,
        ..Default::default()
    };
    let mut opt = Optimizer::new(method, cfg, 1).unwrap();
    let mut theta: ParamVector = [1.0].into();
    for _ in 0..steps {
        opt.step(&mut theta, grad).unwrap();
    }
    theta[0]
}

fn criterion_8() -> Outcome {
    const TOL: f64 = 1e-6;
    // Hand-executed from θ₀ = 1 with η = 0.1; `half_square` is f = ½θ², `unit` is g ≡ 1.
    let half_square: fn(&ParamVector) -> ParamVector = |x| x.clone();
    let unit: fn(&ParamVector) -> ParamVector = |_| [1.0].into();
    let golden = [
        ("momentum", iterate(Method::Momentum, 2, half_square), 0.72),
        ("nag", iterate(Method::Nag, 2, half_square), 0.729),
        ("nag_equiv", iterate(Method::NagEquiv, 1, half_square), 0.81),
        ("adagrad", iterate(Method::Adagrad, 2, unit), 0.829289),
        ("adasqrt", iterate(Method::AdaSqrt, 2, half_square), 0.829680),
        ("adam", iterate(Method::Adam, 2, half_square), 0.800412),
        ("rmsprop", iterate(Method::Rmsprop, 1, unit), 0.683772),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, got, want) in golden {
        ok &= (got - want).abs() <= TOL;
        parts.push(format!("{name} {got:.6}"));
    }
    verdict(ok, format!("{} (tol {TOL:e})", parts.join(", ")))
}

fn criterion_9() -> Outcome {
    const STEP: f64 = 1e-6;
    const TOL: f64 = 1e-6;
    const MLP_TOL: f64 = 1e-5;
    let mut rng = Rng::new(SEED + 9);
    let quad = Quadratic::new(
        DenseMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap(),
        [1.0, 2.0].into(),
    )
    .unwrap();
    let lg = linear_gaussian(SEED);
    let sm = softmax(SEED);
    let tiny = tiny_mlp(SEED);
    let mut parts = Vec::new();
    let mut ok = true;
    for p in [&quad as &dyn Problem, &lg, &sm, &tiny] {
        let theta = random_vector(p.dim(), 0.5, &mut rng);
        let err = rel_error(&p.grad(&theta), &fd_gradient(problem_loss(p), &theta, STEP));
        ok &= err <= TOL;
        parts.push(format!("{:?} {err:.1e}", p.kind()));
    }

    // A sampled slice of coordinates of the full-size network, in double precision.
    let n = 8;
    let pixels = (0..n * MNIST_LAYERS[0]).map(|_| rng.uniform() as f32).collect();
    let labels = (0..n).map(|_| rng.below(10) as u8).collect();
    let data = Dataset::new(pixels, labels, MNIST_LAYERS[0]).unwrap();
    let mlp = MlpProblem::mnist(data, None, Precision::F64).unwrap();
    let theta = mlp.initial_point(&mut rng);
    let batch: Vec<usize> = (0..n).collect();
    let analytic = mlp.minibatch_grad(&theta, &batch);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let i = rng.below(mlp.dim());
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[i] += STEP;
        minus[i] -= STEP;
        let fd = (mlp.minibatch_loss_grad(&plus, &batch).0 - mlp.minibatch_loss_grad(&minus, &batch).0)
            / (2.0 * STEP);
        worst = worst.max((analytic[i] - fd).abs() / analytic[i].abs().max(1e-3));
    }
    ok &= worst <= MLP_TOL;
    parts.push(format!("mnist network, 40 coordinates {worst:.1e} (tol {MLP_TOL:e})"));
    verdict(ok, format!("{} (tol {TOL:e})", parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("nag equivalence", criterion_1),
        ("fisher identity", criterion_2),
        ("kl taylor expansion", criterion_3),
        ("natural gradient direction", criterion_4),
        ("ngd one-step optimum", criterion_5),
        ("adasqrt regret", criterion_6),
        ("mnist reproduction", criterion_7),
        ("optimizer golden values", criterion_8),
        ("gradient correctness", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!(
            "{tag} criterion {}: {name}: {detail} [{:.1}s]",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria failed", failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
