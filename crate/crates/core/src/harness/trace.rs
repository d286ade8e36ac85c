use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

pub const TRACE_COLUMNS: [&str; 9] = [
    "step",
    "epoch",
    "train_loss",
    "eval_loss",
    "test_error_rate",
    "grad_norm",
    "g_t_min",
    "g_t_max",
    "wall_ms",
];

/// One line of `trace.csv`. Absent values are written as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub epoch: f64,
    /// Loss on the batch the step's gradient came from.
    pub train_loss: Option<f64>,
    pub eval_loss: Option<f64>,
    pub test_error_rate: Option<f64>,
    pub grad_norm: Option<f64>,
    pub g_t_min: Option<f64>,
    pub g_t_max: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl TraceRow {
    pub fn new(step: usize, epoch: f64) -> Self {
        TraceRow {
            step,
            epoch,
            train_loss: None,
            eval_loss: None,
            test_error_rate: None,
            grad_norm: None,
            g_t_min: None,
            g_t_max: None,
            wall_ms: None,
        }
    }

    pub fn header() -> String {
        TRACE_COLUMNS.join(",")
    }

    pub fn csv_line(&self) -> String {
        let mut line = format!("{},{}", self.step, self.epoch);
        for v in [
            self.train_loss,
            self.eval_loss,
            self.test_error_rate,
            self.grad_norm,
            self.g_t_min,
            self.g_t_max,
            self.wall_ms,
        ] {
            line.push(',');
            if let Some(v) = v {
                write!(line, "{v}").expect("write to string");
            }
        }
        line
    }
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(&TraceRow::header());
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
