//! `infer`: MAP scores for a general, shared-pairwise or multi-scale system.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Args;
use gcrf_core::io::{format_vector, read_system, read_vector};
use gcrf_core::multires::fuse_scores;
use gcrf_core::synth::random_pairwise;
use gcrf_core::{
    Coupling, MultiResGraph, MultiResSystem, PottsSystem, QuadraticSystem, ScoreField, SolverConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::output::{residual_csv, summary, write};
use crate::{out_dir, GridArgs, SolverArgs};

#[derive(Args)]
pub struct InferArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Pairwise matrix; pixel-sized with `--potts`.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Unary vector; class-major `L × P` with `--potts`, once per scale with `--multires`.
    #[arg(long = "unary", required = true)]
    unaries: Vec<PathBuf>,
    #[arg(long, conflicts_with = "multires")]
    potts: bool,
    #[arg(long)]
    multires: bool,
    /// Scale factors relative to the finest grid.
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.333")]
    scales: Vec<f64>,
    #[arg(long, conflicts_with = "decoupled")]
    coupled: bool,
    #[arg(long)]
    decoupled: bool,
    #[command(flatten)]
    grid: GridArgs,
    /// Amplitude of the generated multi-scale pairwise matrix when `--system` is absent.
    #[arg(long, default_value_t = 0.05)]
    weight: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "infer-out")]
    out: PathBuf,
}

pub fn run(args: &InferArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.solver.config();
    cfg.validate()?;
    out_dir(&args.out)?;
    if args.multires {
        multires(args, &cfg)
    } else if args.potts {
        potts(args, &cfg)
    } else {
        general(args, &cfg)
    }
}

fn single_unary(args: &InferArgs) -> anyhow::Result<Vec<f64>> {
    match args.unaries.as_slice() {
        [one] => Ok(read_vector(one).with_context(|| format!("reading {}", one.display()))?),
        _ => bail!("exactly one --unary is expected"),
    }
}

fn system_path(args: &InferArgs) -> anyhow::Result<&PathBuf> {
    args.system.as_ref().context("--system is required")
}

fn general(args: &InferArgs, cfg: &SolverConfig) -> anyhow::Result<ExitCode> {
    let sys = QuadraticSystem::new(read_system(system_path(args)?)?, args.lambda)?;
    let b = single_unary(args)?;
    let sol = sys.infer(&b, cfg)?;
    write(&args.out.join("x.txt"), &format_vector(&sol.x))?;
    write(&args.out.join("residuals.csv"), &residual_csv(&sol.report))?;
    let line = summary("solve", &sol.report);
    write(&args.out.join("report.txt"), &format!("{line}\n"))?;
    println!("{line}");
    Ok(ExitCode::SUCCESS)
}

fn potts(args: &InferArgs, cfg: &SolverConfig) -> anyhow::Result<ExitCode> {
    let shared = read_system(system_path(args)?)?;
    let p = shared.dim();
    let flat = single_unary(args)?;
    if p == 0 || flat.len() % p != 0 {
        bail!(
            "unary length {} is not a multiple of the pixel count {p}",
            flat.len()
        );
    }
    let labels = flat.len() / p;
    let unaries: Vec<Vec<f64>> = flat.chunks(p).map(<[f64]>::to_vec).collect();
    let sys = PottsSystem::new(shared, labels, args.lambda)?;
    let out = sys.infer(&unaries, cfg)?;

    let mut lines = vec![summary("stage sum", &out.sum_report)];
    write(
        &args.out.join("residuals_sum.csv"),
        &residual_csv(&out.sum_report),
    )?;
    for (k, report) in out.class_reports.iter().enumerate() {
        lines.push(summary(&format!("stage class {k}"), report));
        write(
            &args.out.join(format!("residuals_class{k}.csv")),
            &residual_csv(report),
        )?;
    }
    lines.push(format!("solver_invocations={}", out.solver_invocations()));
    let x: Vec<f64> = out.classes.concat();
    write(&args.out.join("x.txt"), &format_vector(&x))?;
    let text = lines.join("\n") + "\n";
    write(&args.out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn multires(args: &InferArgs, cfg: &SolverConfig) -> anyhow::Result<ExitCode> {
    let coupling = match (args.coupled, args.decoupled) {
        (_, true) => Coupling::Decoupled,
        _ => Coupling::Coupled,
    };
    let g = &args.grid;
    let graph = MultiResGraph::from_factors(
        g.height,
        g.width,
        g.labels,
        g.stencil,
        &args.scales,
        coupling,
    )?;
    if args.unaries.len() != graph.scales().len() {
        bail!(
            "expected {} --unary files, one per scale",
            graph.scales().len()
        );
    }
    let fields = graph
        .scales()
        .iter()
        .zip(&args.unaries)
        .map(|(s, path)| Ok(ScoreField::new(*s, read_vector(path)?)?))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let pattern = graph.label_pattern();
    let pairwise = match &args.system {
        Some(path) => {
            let a = read_system(path)?;
            if let Some((i, j, _)) = a
                .iter()
                .find(|&(i, j, v)| v != 0.0 && pattern.get(i, j).is_none())
            {
                bail!("entry ({i}, {j}) is outside the {coupling:?} multi-scale pattern");
            }
            a
        }
        None => random_pairwise(
            &pattern,
            args.weight,
            &mut ChaCha8Rng::seed_from_u64(args.seed),
        ),
    };
    let sys = MultiResSystem::new(graph, pairwise, args.lambda)?;
    let (scores, report) = sys.infer_fields(&fields, cfg)?;

    for (s, f) in scores.iter().enumerate() {
        write(
            &args.out.join(format!("x_scale{s}.txt")),
            &format_vector(f.data()),
        )?;
    }
    write(
        &args.out.join("fused.txt"),
        &format_vector(fuse_scores(&scores)?.data()),
    )?;
    write(&args.out.join("residuals.csv"), &residual_csv(&report))?;
    let sizes: Vec<String> = sys
        .graph()
        .scales()
        .iter()
        .map(|s| format!("{}x{}", s.height(), s.width()))
        .collect();
    let text = format!(
        "scales={} coupling={coupling:?} cross_links={}\n{}\n",
        sizes.join(","),
        sys.graph().cross_links().len(),
        summary("solve", &report)
    );
    write(&args.out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}
