//! `train-toy`: learn pairwise weights on a synthetic segmentation task.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use gcrf_core::io::{format_system, format_vector};
use gcrf_core::trainer::{
    baseline_accuracy, evaluate, train, Parameterization, SyntheticTask, TrainConfig,
};
use gcrf_core::{GridGraph, Method, SolverConfig};

use crate::output::write;
use crate::{out_dir, GridArgs};

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 100.0)]
    lr: f64,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Share one pixel-level matrix across label pairs.
    #[arg(long)]
    potts: bool,
    /// Also learn a per-label unary bias.
    #[arg(long)]
    bias: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0.2)]
    occlusion: f64,
    #[arg(long, default_value = "cg")]
    solver: Method,
    #[arg(long = "tol", default_value_t = 1e-10)]
    tolerance: f64,
    #[arg(long, default_value = "train-out")]
    out: PathBuf,
}

pub fn run(args: &TrainArgs) -> anyhow::Result<ExitCode> {
    let g = &args.grid;
    let graph = GridGraph::new(g.height, g.width, g.labels, g.stencil)?;
    let task = SyntheticTask::new(args.seed, graph, args.noise, args.occlusion)?;
    let parameterization = if args.potts {
        Parameterization::Potts
    } else {
        Parameterization::General
    };
    let mut cfg = TrainConfig::new(parameterization);
    cfg.steps = args.steps;
    cfg.learning_rate = args.lr;
    cfg.lambda = args.lambda;
    cfg.learn_bias = args.bias;
    cfg.solver = SolverConfig::new(args.solver).with_tolerance(args.tolerance);

    let outcome = train(&task, &cfg)?;
    out_dir(&args.out)?;
    let mut csv = String::from("step,loss,accuracy\n");
    for row in &outcome.history {
        writeln!(csv, "{},{:e},{}", row.step, row.loss, row.accuracy)?;
    }
    write(&args.out.join("history.csv"), &csv)?;
    write(
        &args.out.join("pairwise.txt"),
        &format_system(&outcome.pairwise),
    )?;
    write(&args.out.join("bias.txt"), &format_vector(&outcome.bias))?;

    let (_, y) = task.generate()?;
    let metrics = evaluate(&outcome.scores, &y)?;
    let last = outcome.final_row();
    let line = format!(
        "final step={} loss={:.6} accuracy={:.4} mean_iou={:.4} baseline_accuracy={:.4}",
        last.step,
        last.loss,
        last.accuracy,
        metrics.mean_iou,
        baseline_accuracy(&task)?
    );
    write(&args.out.join("metrics.txt"), &format!("{line}\n"))?;
    println!("{line}");
    Ok(ExitCode::SUCCESS)
}
