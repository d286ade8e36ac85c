//! `gradlab`: run optimizer experiments and numerical checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gradlab_core::harness::{
    run_comparison, run_experiment, run_sweep, run_verify, ExperimentConfig, RunStatus,
};
use gradlab_core::problems::inspect_idx;
use gradlab_core::verify::{CheckName, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "gradlab", version, about = "Gradient-method experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with one config and write trace.csv and meta.txt.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several configs on the same problem and seed, and merge their traces.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/compare")]
        out: PathBuf,
    },
    /// Run numerical checks; exits nonzero if any fails.
    Verify {
        /// nag_equiv, regret, fisher, kl, ngd_direction, mle, ngd_step or all
        #[arg(value_parser = parse_check)]
        check: CheckName,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "runs/verify")]
        out: PathBuf,
    },
    /// Repeat one config over a grid of learning rates.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eta_grid: Vec<f64>,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Print the header and value statistics of an IDX file.
    Inspect { file: PathBuf },
}

/// Command-line values that replace the corresponding config keys.
#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, conflicts_with = "epochs")]
    steps: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Record wall-clock milliseconds in the trace.
    #[arg(long)]
    timing: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(e) = self.eta {
            cfg.optimizer.eta = Some(e);
        }
        if let Some(s) = self.steps {
            cfg.steps = Some(s);
            cfg.epochs = None;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = Some(e);
            cfg.steps = None;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = Some(b);
        }
        cfg.timing |= self.timing;
    }
}

fn parse_check(s: &str) -> Result<CheckName, String> {
    s.parse().map_err(|e: gradlab_core::Error| e.to_string())
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = load(&config)?;
            overrides.apply(&mut cfg);
            cfg.validate()?;
            let run = run_experiment(&cfg)?;
            println!("status: {}", run.status);
            if let Some(e) = run.final_eval {
                println!("final eval loss: {:.6e}", e.loss);
                if let Some(err) = e.error_rate {
                    println!("final test error rate: {err:.4}");
                }
            }
            println!("trace: {}", run.trace_path.display());
            Ok(match run.status {
                RunStatus::Completed => ExitCode::SUCCESS,
                RunStatus::Diverged { .. } => ExitCode::FAILURE,
            })
        }
        Command::Compare { configs, seed, out } => {
            let cfgs = configs.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
            let report = run_comparison(&cfgs, seed, &out)?;
            for (label, run) in report.labels.iter().zip(&report.runs) {
                let loss = run.final_eval.map(|e| format!("{:.6e}", e.loss)).unwrap_or_default();
                println!("{label}: {} final eval loss {loss}", run.status);
            }
            println!("same batches: {}", report.same_batches);
            println!("merged: {}", report.merged_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { check, seed, out } => {
            let outcome = run_verify(check, seed, &out)?;
            for row in &outcome.rows {
                println!("{row}");
            }
            println!("report: {}", outcome.report_path.display());
            if outcome.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in outcome.failures() {
                    eprintln!("failed: {}[{}]", f.check, f.case);
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Sweep {
            config,
            eta_grid,
            out,
        } => {
            let cfg = load(&config)?;
            let report = run_sweep(&cfg, &eta_grid, &out)?;
            for e in &report.entries {
                let err = e.final_error_rate.map(|x| format!(" error {x:.4}")).unwrap_or_default();
                let loss = e.final_eval_loss.map(|x| format!("{x:.6e}")).unwrap_or_default();
                println!("eta {:e}: {} loss {loss}{err}", e.eta, e.status);
            }
            if let Some(b) = report.best {
                println!("best eta: {:e}", report.entries[b].eta);
            }
            println!("summary: {}", report.summary_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Data {
            command: DataCommand::Inspect { file },
        } => {
            let summary = inspect_idx(&file)?;
            println!("{summary}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
