//! CSV and report formatting shared by the subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use gcrf_core::SolveReport;

pub fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `iteration,residual`, starting with iteration 0 for the initial guess.
pub fn residual_csv(report: &SolveReport) -> String {
    let mut out = String::from("iteration,residual\n");
    writeln!(out, "0,{:e}", report.initial_residual).unwrap();
    for (k, r) in report.residuals.iter().enumerate() {
        writeln!(out, "{},{:e}", k + 1, r).unwrap();
    }
    out
}

pub fn summary(label: &str, report: &SolveReport) -> String {
    format!(
        "{label}: method={} iterations={} initial_residual={:e} final_residual={:e} converged={} mode={:?}",
        report.method,
        report.iterations,
        report.initial_residual,
        report.final_residual(),
        report.converged,
        report.residual_mode,
    )
}
