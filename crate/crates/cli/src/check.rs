//! `grad-check`: finite-difference agreement on random small models.

use std::process::ExitCode;

use clap::Args;
use gcrf_core::gradcheck::{random_suite, GradCheckConfig};

#[derive(Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 50)]
    models: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    threshold: f64,
    /// Lower bound on the relative-error denominator.
    #[arg(long, default_value_t = 1e-8)]
    abs_floor: f64,
    #[arg(long = "tol", default_value_t = 1e-13)]
    tolerance: f64,
}

pub fn run(args: &GradCheckArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = GradCheckConfig {
        step: args.step,
        rel_tolerance: args.threshold,
        abs_floor: args.abs_floor,
        ..GradCheckConfig::default()
    };
    cfg.solver = cfg.solver.with_tolerance(args.tolerance);
    let report = random_suite(args.models, args.seed, &cfg)?;
    for g in &report.groups {
        println!("{g}");
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!(
        "{verdict} models={} worst_rel={:.3e} threshold={:.1e}",
        report.models,
        report.worst_rel(),
        args.threshold
    );
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
