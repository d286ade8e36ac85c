use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use super::config::{ExperimentConfig, StepperConfig};
use super::trace::{write_file, write_trace, TraceRow};
use crate::linalg::{ParamVector, Rng};
use crate::ngd::step_ngd;
use crate::optimizers::{Method, Optimizer};
use crate::problems::{Eval, Problem, ProblemKind};
use crate::{Error, Result};

const DATA_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const BATCH_STREAM: u64 = 3;
const SYNTHETIC_EVAL_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    Diverged { step: usize },
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunStatus::Completed => f.write_str("completed"),
            RunStatus::Diverged { step } => write!(f, "diverged at step {step}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub trace_path: PathBuf,
    pub meta_path: PathBuf,
    pub status: RunStatus,
    pub steps_run: usize,
    pub final_eval: Option<Eval>,
    /// FNV-1a digest of every minibatch index, in order.
    pub batch_digest: u64,
    pub rows: Vec<TraceRow>,
    pub theta: ParamVector,
}

/// 64-bit FNV-1a, used to fingerprint the batch index stream.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv1a {
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

/// Shuffled minibatches, reshuffled every epoch from a dedicated stream so
/// that every optimizer sharing a seed sees the same batches.
struct BatchStream {
    rng: Rng,
    n: usize,
    size: usize,
    order: Vec<usize>,
    cursor: usize,
    digest: Fnv1a,
}

impl BatchStream {
    fn new(seed: u64, n: usize, size: usize) -> Self {
        BatchStream {
            rng: Rng::new(seed).substream(BATCH_STREAM),
            n,
            size,
            order: Vec::new(),
            cursor: 0,
            digest: Fnv1a::default(),
        }
    }

    fn steps_per_epoch(&self) -> usize {
        self.n.div_ceil(self.size)
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.order = (0..self.n).collect();
            self.rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let end = (self.cursor + self.size).min(self.n);
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        for &i in &batch {
            self.digest.update(&(i as u64).to_le_bytes());
        }
        batch
    }
}

enum Stepper {
    FirstOrder(Optimizer),
    Ngd(crate::ngd::NgdConfig),
}

/// The version string written to run metadata.
pub fn version_string() -> String {
    format!(
        "gradlab {}-{}",
        env!("CARGO_PKG_VERSION"),
        option_env!("GRADLAB_GIT_DESCRIBE").unwrap_or("unknown")
    )
}

/// Trains according to `config` and writes `trace.csv` and `meta.txt` to its `out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let problem = config
        .problem
        .build(&mut Rng::new(config.seed).substream(DATA_STREAM))?;
    run_on_problem(config, problem.as_ref())
}

/// [`run_experiment`] on an already constructed problem.
pub fn run_on_problem(config: &ExperimentConfig, problem: &dyn Problem) -> Result<RunSummary> {
    config.validate()?;
    let dim = problem.dim();
    let mut theta = match &config.theta0 {
        Some(t) if t.len() != dim => {
            return Err(Error::Config(format!(
                "theta0 has {} entries, problem has dimension {dim}",
                t.len()
            )))
        }
        Some(t) => ParamVector::from(t.clone()),
        None => problem.initial_point(&mut Rng::new(config.seed).substream(INIT_STREAM)),
    };
    let mut stepper = match config.optimizer.resolve()? {
        StepperConfig::FirstOrder(m, c) => Stepper::FirstOrder(Optimizer::new(m, c, dim)?),
        StepperConfig::Ngd(c) => {
            if problem.model().is_none() {
                return Err(Error::Capability(format!(
                    "ngd needs a closed-form Fisher matrix, unavailable for {:?}",
                    problem.kind()
                )));
            }
            Stepper::Ngd(c)
        }
    };

    let n = problem.num_samples();
    let mut batches = config.batch_size.map(|b| BatchStream::new(config.seed, n, b.min(n)));
    let steps_per_epoch = batches.as_ref().map_or(1, BatchStream::steps_per_epoch);
    let total_steps = match (config.steps, config.epochs) {
        (Some(s), _) => s,
        (None, Some(e)) => e * steps_per_epoch,
        (None, None) => unreachable!("validated"),
    };
    let eval_every = config.eval_every.unwrap_or(match problem.kind() {
        ProblemKind::MlpMnist => steps_per_epoch,
        _ => SYNTHETIC_EVAL_EVERY,
    });

    let start = Instant::now();
    let elapsed = |row: &mut TraceRow| {
        if config.timing {
            row.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
    };
    let evaluate = |row: &mut TraceRow, theta: &ParamVector| -> Eval {
        let e = problem.evaluate(theta);
        row.eval_loss = Some(e.loss);
        row.test_error_rate = e.error_rate;
        e
    };

    let mut rows = Vec::with_capacity(total_steps + 1);
    let mut first = TraceRow::new(0, 0.0);
    let mut final_eval = Some(evaluate(&mut first, &theta));
    elapsed(&mut first);
    rows.push(first);

    let mut status = RunStatus::Completed;
    let mut steps_run = 0;
    for step in 1..=total_steps {
        let mut row = TraceRow::new(step, step as f64 / steps_per_epoch as f64);
        let batch = batches.as_mut().map(BatchStream::next_batch);
        let mut batch_loss = f64::NAN;
        let mut grad_norm = f64::NAN;
        let outcome = match &mut stepper {
            Stepper::FirstOrder(opt) => {
                let mut first_eval = true;
                let r = opt.step(&mut theta, |x| {
                    let (l, g) = match &batch {
                        Some(b) => problem.minibatch_loss_grad(x, b),
                        None => (problem.loss(x), problem.grad(x)),
                    };
                    if first_eval {
                        batch_loss = l;
                        grad_norm = g.norm();
                        first_eval = false;
                    }
                    g
                });
                if opt.method() == Method::AdaSqrt && r.is_ok() {
                    let (lo, hi) = opt.effective_rate()?.min_max();
                    row.g_t_min = Some(lo);
                    row.g_t_max = Some(hi);
                }
                r
            }
            Stepper::Ngd(c) => {
                batch_loss = problem.loss(&theta);
                grad_norm = problem.grad(&theta).norm();
                step_ngd(problem, &theta, c).map(|t| theta = t)
            }
        };
        steps_run = step;
        row.train_loss = Some(batch_loss);
        row.grad_norm = Some(grad_norm);
        let diverged = match outcome {
            Ok(()) => !batch_loss.is_finite() || !theta.is_finite(),
            Err(Error::NonFinite(_)) => true,
            Err(e) => return Err(e),
        };
        if diverged {
            status = RunStatus::Diverged { step };
            final_eval = None;
            elapsed(&mut row);
            rows.push(row);
            break;
        }
        if step % eval_every == 0 || step == total_steps {
            let e = evaluate(&mut row, &theta);
            if !e.loss.is_finite() {
                status = RunStatus::Diverged { step };
                final_eval = None;
                elapsed(&mut row);
                rows.push(row);
                break;
            }
            final_eval = Some(e);
        }
        elapsed(&mut row);
        rows.push(row);
    }

    let batch_digest = batches.map_or(Fnv1a::default().finish(), |b| b.digest.finish());
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let trace_path = config.out_dir.join("trace.csv");
    let meta_path = config.out_dir.join("meta.txt");
    write_trace(&trace_path, &rows)?;

    let mut meta = String::new();
    let _ = writeln!(meta, "version: {}", version_string());
    let _ = writeln!(meta, "seed: {}", config.seed);
    let _ = writeln!(meta, "precision: {}", problem.precision());
    let _ = writeln!(meta, "problem: {:?}", problem.kind());
    let _ = writeln!(meta, "dimension: {dim}");
    let _ = writeln!(meta, "optimizer: {}", config.optimizer.name);
    let _ = writeln!(meta, "steps: {steps_run}/{total_steps}");
    let _ = writeln!(meta, "batch_digest: {batch_digest:016x}");
    let _ = writeln!(meta, "status: {status}");
    if let Some(e) = final_eval {
        let _ = writeln!(meta, "final_eval_loss: {}", e.loss);
        if let Some(err) = e.error_rate {
            let _ = writeln!(meta, "final_test_error_rate: {err}");
        }
    }
    let _ = writeln!(meta, "config: {}", config.to_json());
    write_file(&meta_path, meta.as_bytes())?;

    Ok(RunSummary {
        trace_path,
        meta_path,
        status,
        steps_run,
        final_eval,
        batch_digest,
        rows,
        theta,
    })
}
