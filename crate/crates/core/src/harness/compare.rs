use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, RunStatus, RunSummary};
use super::trace::write_file;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub labels: Vec<String>,
    pub runs: Vec<RunSummary>,
    pub merged_path: PathBuf,
    /// True when every run consumed the same minibatch index stream.
    pub same_batches: bool,
}

/// Runs each config under a shared seed into `out_dir/<optimizer>` and
/// writes `out_dir/merged.csv`, one row per step.
pub fn run_comparison(
    configs: &[ExperimentConfig],
    seed: Option<u64>,
    out_dir: &Path,
) -> Result<ComparisonReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::Config("comparison needs at least one config".into()))?;
    let seed = seed.unwrap_or(first.seed);
    for c in configs {
        if c.problem != first.problem {
            return Err(Error::Config(format!(
                "comparison mixes problems {:?} and {:?}",
                first.problem.kind(),
                c.problem.kind()
            )));
        }
        if c.batch_size != first.batch_size {
            return Err(Error::Config("comparison mixes batch sizes".into()));
        }
    }

    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut runs = Vec::new();
    for c in configs {
        let base = c.optimizer.name.name().to_string();
        let count = counts.entry(base.clone()).or_insert(0);
        *count += 1;
        let label = if *count == 1 { base } else { format!("{base}_{count}") };
        let mut cfg = c.clone();
        cfg.seed = seed;
        cfg.out_dir = out_dir.join(&label);
        runs.push(run_experiment(&cfg)?);
        labels.push(label);
    }

    let mut merged: BTreeMap<usize, Vec<[Option<f64>; 3]>> = BTreeMap::new();
    for (k, run) in runs.iter().enumerate() {
        for row in &run.rows {
            let slot = merged.entry(row.step).or_insert_with(|| vec![[None; 3]; runs.len()]);
            slot[k] = [row.train_loss, row.eval_loss, row.test_error_rate];
        }
    }
    let mut csv = String::from("step");
    for l in &labels {
        let _ = write!(csv, ",{l}_train_loss,{l}_eval_loss,{l}_test_error_rate");
    }
    csv.push('\n');
    for (step, cols) in &merged {
        let _ = write!(csv, "{step}");
        for v in cols.iter().flatten() {
            match v {
                Some(x) => {
                    let _ = write!(csv, ",{x}");
                }
                None => csv.push(','),
            }
        }
        csv.push('\n');
    }
    let merged_path = out_dir.join("merged.csv");
    write_file(&merged_path, csv.as_bytes())?;

    let same_batches = runs.windows(2).all(|w| w[0].batch_digest == w[1].batch_digest);
    Ok(ComparisonReport {
        labels,
        runs,
        merged_path,
        same_batches,
    })
}

/// `n` points spaced evenly in log scale from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        return Err(Error::Argument(format!(
            "log grid needs 0 < lo <= hi and n > 0, got {lo}, {hi}, {n}"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub eta: f64,
    pub status: RunStatus,
    pub final_eval_loss: Option<f64>,
    pub final_error_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Index into `entries` of the run with the lowest final error rate,
    /// or lowest evaluation loss when the problem has no error rate.
    pub best: Option<usize>,
    pub summary_path: PathBuf,
}

/// Runs `config` once per learning rate into `out_dir/eta_<value>` and writes `out_dir/sweep.csv`.
pub fn run_sweep(config: &ExperimentConfig, etas: &[f64], out_dir: &Path) -> Result<SweepReport> {
    if etas.is_empty() {
        return Err(Error::Argument("empty learning-rate grid".into()));
    }
    let mut entries = Vec::new();
    for &eta in etas {
        let mut cfg = config.clone();
        cfg.optimizer.eta = Some(eta);
        cfg.out_dir = out_dir.join(format!("eta_{eta:e}"));
        let run = run_experiment(&cfg)?;
        entries.push(SweepEntry {
            eta,
            status: run.status,
            final_eval_loss: run.final_eval.map(|e| e.loss),
            final_error_rate: run.final_eval.and_then(|e| e.error_rate),
        });
    }
    let score = |e: &SweepEntry| match e.status {
        RunStatus::Completed => e.final_error_rate.or(e.final_eval_loss),
        RunStatus::Diverged { .. } => None,
    };
    let best = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| score(e).map(|s| (i, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);

    let mut csv = String::from("eta,status,final_eval_loss,final_test_error_rate\n");
    for e in &entries {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            e.eta,
            e.status,
            opt(e.final_eval_loss),
            opt(e.final_error_rate)
        );
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let summary_path = out_dir.join("sweep.csv");
    write_file(&summary_path, csv.as_bytes())?;
    Ok(SweepReport {
        entries,
        best,
        summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-4, 1e-1, 4).unwrap();
        assert_eq!(g.len(), 4);
        for (a, b) in g.iter().zip([1e-4, 1e-3, 1e-2, 1e-1]) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        assert_eq!(log_grid(0.5, 0.5, 1).unwrap(), vec![0.5]);
        assert!(log_grid(0.0, 1.0, 3).is_err());
        assert!(log_grid(1.0, 0.1, 3).is_err());
    }
}
