//! `bench-solvers`: iteration counts of every solver on the same systems.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use gcrf_core::io::{read_system, read_vector};
use gcrf_core::solvers::solve;
use gcrf_core::synth::{potts_benchmark, random_vector};
use gcrf_core::{Error, GridGraph, Method, SolverConfig, SparseSym};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::output::{residual_csv, write};
use crate::{out_dir, GridArgs, SolverArgs};

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Shared pairwise weights are drawn uniformly from [-weight, weight].
    #[arg(long, default_value_t = 0.2)]
    weight: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    count: usize,
    /// Pairwise matrices to use instead of generated ones; λI is added.
    #[arg(long = "system")]
    systems: Vec<PathBuf>,
    /// Right-hand sides paired with `--system`; standard normal when omitted.
    #[arg(long = "rhs")]
    rhs: Vec<PathBuf>,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

fn load(args: &BenchArgs) -> anyhow::Result<Vec<(SparseSym, Vec<f64>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    if args.systems.is_empty() {
        let g = GridGraph::new(
            args.grid.height,
            args.grid.width,
            args.grid.labels,
            args.grid.stencil,
        )?;
        return (0..args.count)
            .map(|_| Ok(potts_benchmark(&g, args.weight, args.lambda, &mut rng)?))
            .collect();
    }
    if !args.rhs.is_empty() && args.rhs.len() != args.systems.len() {
        anyhow::bail!("--rhs must be given once per --system");
    }
    args.systems
        .iter()
        .enumerate()
        .map(|(k, path)| {
            let a = read_system(path)?;
            let b = match args.rhs.get(k) {
                Some(p) => read_vector(p)?,
                None => random_vector(a.dim(), &mut rng),
            };
            Ok((a.add_scaled_identity(args.lambda), b))
        })
        .collect()
}

pub fn run(args: &BenchArgs) -> anyhow::Result<ExitCode> {
    let systems = load(args)?;
    out_dir(&args.out)?;
    let residual_dir = args.out.join("residuals");
    out_dir(&residual_dir)?;
    let base = args.solver.config();
    base.validate()?;

    let mut csv = String::from("method,system_id,iterations,final_residual\n");
    let mut all_converged = true;
    for method in Method::ALL {
        let cfg = SolverConfig {
            method,
            ..base.clone()
        };
        let mut total = 0;
        for (id, (m, b)) in systems.iter().enumerate() {
            let report = match solve(m, b, None, &cfg) {
                Ok(sol) => sol.report,
                Err(Error::NotConverged(sol)) => sol.report,
                Err(e) => return Err(e.into()),
            };
            all_converged &= report.converged;
            total += report.iterations;
            writeln!(
                csv,
                "{},{},{},{:e}",
                method.name(),
                id,
                report.iterations,
                report.final_residual()
            )?;
            write(
                &residual_dir.join(format!("{}_{id}.csv", method.name())),
                &residual_csv(&report),
            )?;
        }
        println!(
            "{:<13} mean_iterations={:.3}",
            method.name(),
            total as f64 / systems.len().max(1) as f64
        );
    }
    write(&args.out.join("summary.csv"), &csv)?;
    Ok(if all_converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
