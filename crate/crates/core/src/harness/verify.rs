use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::trace::write_file;
use crate::verify::{run_suite, CheckName, CheckResult};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub rows: Vec<CheckResult>,
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.rows.iter().filter(|r| !r.passed)
    }
}

/// Runs the selected checks and writes `report.txt` and `report.csv` to `out_dir`.
pub fn run_verify(which: CheckName, seed: u64, out_dir: &Path) -> Result<VerifyOutcome> {
    let rows = run_suite(which, seed);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut text = String::new();
    for r in &rows {
        let _ = writeln!(text, "{r}");
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    let _ = writeln!(
        text,
        "{} checks, {} failed (seed {seed})",
        rows.len(),
        failed
    );
    let mut csv = String::from(CheckResult::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let report_path = out_dir.join("report.txt");
    let csv_path = out_dir.join("report.csv");
    write_file(&report_path, text.as_bytes())?;
    write_file(&csv_path, csv.as_bytes())?;
    Ok(VerifyOutcome {
        rows,
        report_path,
        csv_path,
    })
}
