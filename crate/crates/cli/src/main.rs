//! `gcrf`: solver benchmarks, inference, gradient checks and toy training.

mod bench;
mod check;
mod infer;
mod output;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcrf_core::{Method, ResidualMode, SolverConfig, Stencil};

#[derive(Parser)]
#[command(
    name = "gcrf",
    version,
    about = "Gaussian-CRF inference as sparse quadratic optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the four iterative solvers on generated or supplied systems.
    BenchSolvers(bench::BenchArgs),
    /// Solve for the MAP scores of a general, shared-pairwise or multi-scale system.
    Infer(infer::InferArgs),
    /// Compare analytic gradients with central finite differences on random models.
    GradCheck(check::GradCheckArgs),
    /// Train pairwise weights on a synthetic segmentation task.
    TrainToy(train::TrainArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// jacobi, gauss-seidel, cg or gmres.
    #[arg(long, default_value = "cg")]
    solver: Method,
    #[arg(long = "tol", default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, default_value_t = 30)]
    restart: usize,
    /// Measure residuals relative to the right-hand side norm.
    #[arg(long)]
    relative: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.solver).with_tolerance(self.tolerance);
        cfg.max_iterations = self.max_iterations;
        cfg.gmres_restart = self.restart;
        if self.relative {
            cfg.residual_mode = ResidualMode::Relative;
        }
        cfg
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = 16)]
    height: usize,
    #[arg(long, default_value_t = 16)]
    width: usize,
    #[arg(long, default_value_t = 2)]
    labels: usize,
    /// Neighbourhood size: 4, 8 or 12.
    #[arg(long, default_value = "4")]
    stencil: Stencil,
}

fn out_dir(path: &PathBuf) -> anyhow::Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();

    let result = match Cli::parse().command {
        Command::BenchSolvers(args) => bench::run(&args),
        Command::Infer(args) => infer::run(&args),
        Command::GradCheck(args) => check::run(&args),
        Command::TrainToy(args) => train::run(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
