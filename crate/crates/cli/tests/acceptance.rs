//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gcrf_core::gradcheck::{random_suite, GradCheckConfig};
use gcrf_core::solvers::{gauss_seidel_step, jacobi_step, meanfield_update, solve, MeanFieldMode};
use gcrf_core::synth::{dominant_amplitude, potts_benchmark, random_pairwise, random_vector};
use gcrf_core::trainer::{baseline_accuracy, train, Parameterization, SyntheticTask, TrainConfig};
use gcrf_core::{
    Coupling, GridGraph, Method, MultiResGraph, MultiResSystem, PottsSystem, QuadraticSystem,
    ScoreField, SolverConfig, SparseSym, Stencil,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn dense_solve(a: &SparseSym, lambda: f64, b: &[f64]) -> Vec<f64> {
    let n = a.dim();
    let mut m = DMatrix::identity(n, n) * lambda;
    for (i, j, v) in a.iter() {
        m[(i, j)] += v;
    }
    let chol = m.cholesky().expect("oracle system is SPD");
    chol.solve(&DVector::from_column_slice(b))
        .as_slice()
        .to_vec()
}

fn cg(tol: f64) -> SolverConfig {
    SolverConfig::new(Method::ConjugateGradient).with_tolerance(tol)
}

/// Mean iterations on 25 shared-pairwise 64×64 systems must order CG ≤ GMRES ≤ GS ≤ Jacobi.
fn solver_ordering() -> Verdict {
    let start = Instant::now();
    let g = GridGraph::new(64, 64, 4, Stencil::Four).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let systems: Vec<_> = (0..25)
        .map(|_| potts_benchmark(&g, 0.2, 10.0, &mut rng).unwrap())
        .collect();
    let mut means = Vec::new();
    let mut all_converged = true;
    for method in [
        Method::ConjugateGradient,
        Method::Gmres,
        Method::GaussSeidel,
        Method::Jacobi,
    ] {
        let cfg = SolverConfig::new(method).with_tolerance(1e-6);
        let mut total = 0;
        for (m, b) in &systems {
            match solve(m, b, None, &cfg) {
                Ok(sol) => total += sol.report.iterations,
                Err(_) => all_converged = false,
            }
        }
        means.push((method, total as f64 / systems.len() as f64));
    }
    let elapsed = start.elapsed();
    let ordered = means.windows(2).all(|w| w[0].1 <= w[1].1);
    let summary: Vec<String> = means
        .iter()
        .map(|(m, v)| format!("{}={v:.2}", m.name()))
        .collect();
    check(
        ordered && all_converged && elapsed < Duration::from_secs(60),
        format!(
            "mean iterations {} converged={all_converged} time={:.1}s",
            summary.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Parallel mean field equals Jacobi and sequential mean field equals Gauss-Seidel, bit for bit.
fn meanfield_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..20 {
        let g = GridGraph::new(
            rng.random_range(3..=10),
            rng.random_range(3..=10),
            rng.random_range(1..=4),
            Stencil::Eight,
        )
        .unwrap();
        let pat = SparseSym::build_pattern(&g, true);
        let lambda = rng.random_range(1.0..10.0);
        let m = random_pairwise(&pat, dominant_amplitude(&pat, lambda, 0.9), &mut rng)
            .add_scaled_identity(lambda);
        let b = random_vector(g.dim(), &mut rng);
        let theta: Vec<f64> = b.iter().map(|v| -v).collect();
        let x0 = random_vector(g.dim(), &mut rng);
        let (mut jac, mut par, mut gs, mut seq) = (x0.clone(), x0.clone(), x0.clone(), x0);
        for _ in 0..50 {
            jac = jacobi_step(&m, &b, &jac).unwrap();
            par = meanfield_update(&m, &theta, &par, MeanFieldMode::Parallel).unwrap();
            gs = gauss_seidel_step(&m, &b, &gs).unwrap();
            seq = meanfield_update(&m, &theta, &seq, MeanFieldMode::Sequential).unwrap();
            mismatches += usize::from(jac != par) + usize::from(gs != seq);
        }
    }
    check(
        mismatches == 0,
        format!("20 systems x 50 iterations, {mismatches} mismatching iterates"),
    )
}

/// Analytic gradients match central differences on 50 random small models.
fn gradient_exactness() -> Verdict {
    let start = Instant::now();
    let report = match random_suite(50, 3, &GradCheckConfig::default()) {
        Ok(r) => r,
        Err(e) => return Err(format!("suite error: {e}")),
    };
    let elapsed = start.elapsed();
    let groups: Vec<String> = report
        .groups
        .iter()
        .map(|g| format!("{}={:.2e}", g.name, g.worst_rel))
        .collect();
    check(
        report.passed() && elapsed < Duration::from_secs(120),
        format!(
            "worst relative error {} time={:.1}s",
            groups.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

/// The two-stage shared-pairwise solve agrees with the expanded general system.
fn potts_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut wrong_count = 0;
    for n in 0..30 {
        let h = rng.random_range(1..=6);
        let w = rng.random_range(2..=6);
        let l = rng.random_range(1..=4);
        let stencil = [Stencil::Four, Stencil::Eight, Stencil::Twelve][n % 3];
        let g = GridGraph::new(h, w, l, stencil).unwrap();
        let lambda = rng.random_range(1.0..10.0);
        let pat = SparseSym::build_pattern(&g, false);
        let amp = dominant_amplitude(&pat, lambda, 0.9) / (l.max(2) - 1) as f64;
        let shared = random_pairwise(&pat, amp, &mut rng);
        let b = ScoreField::new(g, random_vector(g.dim(), &mut rng)).unwrap();

        let potts = PottsSystem::new(shared, l, lambda).unwrap();
        let fast = potts.infer(&b.class_vectors(), &cg(1e-10)).unwrap();
        wrong_count += usize::from(fast.solver_invocations() != l + 1);
        let fast = fast.into_field(g).unwrap();
        let general = QuadraticSystem::new(potts.expand_general(), lambda)
            .unwrap()
            .infer(b.data(), &cg(1e-10))
            .unwrap();
        worst = worst.max(max_abs_diff(fast.data(), &general.x));
    }
    check(
        worst <= 1e-6 && wrong_count == 0,
        format!("30 systems, max difference {worst:.2e}, wrong solve counts {wrong_count}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Shared-pairwise inference at 109×85, 21 labels takes at most a third of the general solve.
fn potts_speedup() -> Verdict {
    let g = GridGraph::new(109, 85, 21, Stencil::Four).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lambda = 10.0;
    let shared = random_pairwise(&SparseSym::build_pattern(&g, false), 0.05, &mut rng);
    let potts = PottsSystem::new(shared, g.labels(), lambda).unwrap();
    let general = QuadraticSystem::new(potts.expand_general(), lambda).unwrap();
    let b = ScoreField::new(g, random_vector(g.dim(), &mut rng)).unwrap();
    let classes = b.class_vectors();
    let cfg = cg(1e-6);

    let (mut fast, mut slow) = (Vec::new(), Vec::new());
    for _ in 0..10 {
        let t = Instant::now();
        potts.infer(&classes, &cfg).unwrap();
        fast.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        general.infer(b.data(), &cfg).unwrap();
        slow.push(t.elapsed().as_secs_f64());
    }
    let (fast, slow) = (median(fast), median(slow));
    check(
        fast <= slow / 3.0,
        format!(
            "median shared {:.2}ms vs general {:.2}ms, ratio {:.3}",
            fast * 1e3,
            slow * 1e3,
            fast / slow
        ),
    )
}

fn block(a: &SparseSym, lo: usize, len: usize) -> SparseSym {
    let inside = |i: usize| (lo..lo + len).contains(&i);
    SparseSym::from_triplets(
        len,
        a.iter()
            .filter(|&(i, j, _)| inside(i) && inside(j))
            .map(|(i, j, v)| (i - lo, j - lo, v)),
    )
    .unwrap()
}

/// Multi-scale solves: zero links decouple exactly; nonzero links match a dense oracle.
fn multires_agreement() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_zero, mut worst_dense): (f64, f64) = (0.0, 0.0);
    let mut max_dim = 0;
    for n in 0..10 {
        let stencil = [Stencil::Four, Stencil::Eight, Stencil::Twelve][n % 3];
        let h = rng.random_range(4..=8);
        let w = rng.random_range(4..=8);
        let l = rng.random_range(1..=2);
        let graph =
            MultiResGraph::from_factors(h, w, l, stencil, &[1.0, 0.5, 0.333], Coupling::Coupled)
                .unwrap();
        let lambda = rng.random_range(1.0..5.0);
        let pat = graph.label_pattern();
        let a = random_pairwise(&pat, dominant_amplitude(&pat, lambda, 0.9), &mut rng);
        let b = random_vector(graph.dim(), &mut rng);
        max_dim = max_dim.max(graph.dim());

        // Nonzero links against the dense oracle.
        let sys = MultiResSystem::new(graph.clone(), a.clone(), lambda).unwrap();
        let (fields, _) = sys.infer(&b, &cg(1e-12)).unwrap();
        let x = graph.concat(&fields).unwrap();
        worst_dense = worst_dense.max(max_abs_diff(&x, &dense_solve(&a, lambda, &b)));

        // Zeroed links against independent per-scale solves.
        let mut cut = a.clone();
        let links: Vec<(usize, usize)> = a
            .iter()
            .filter(|&(i, j, _)| i < j && graph.is_cross_scale(i, j))
            .map(|(i, j, _)| (i, j))
            .collect();
        for (i, j) in links {
            cut.set_symmetric(i, j, 0.0).unwrap();
        }
        let (fields, _) = MultiResSystem::new(graph.clone(), cut.clone(), lambda)
            .unwrap()
            .infer(&b, &cg(1e-12))
            .unwrap();
        let mut lo = 0;
        for (s, g) in graph.scales().iter().enumerate() {
            let alone = QuadraticSystem::new(block(&cut, lo, g.dim()), lambda)
                .unwrap()
                .infer(&b[lo..lo + g.dim()], &cg(1e-12))
                .unwrap();
            worst_zero = worst_zero.max(max_abs_diff(fields[s].data(), &alone.x));
            lo += g.dim();
        }
    }
    check(
        worst_zero <= 1e-8 && worst_dense <= 1e-8 && max_dim <= 200,
        format!(
            "zero links {worst_zero:.2e}, dense oracle {worst_dense:.2e}, largest dim {max_dim}"
        ),
    )
}

/// Training beats the unary argmax on average and lowers the loss on every seed.
fn toy_learning() -> Verdict {
    let start = Instant::now();
    let g = GridGraph::new(16, 16, 2, Stencil::Four).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for p in [Parameterization::General, Parameterization::Potts] {
        let cfg = TrainConfig::new(p);
        let (mut base, mut acc, mut lowered) = (0.0, 0.0, 0);
        for seed in 0..10 {
            let task = SyntheticTask::new(seed, g, 0.5, 0.2).unwrap();
            let out = match train(&task, &cfg) {
                Ok(o) => o,
                Err(e) => return Err(format!("{p:?} seed {seed}: {e}")),
            };
            base += baseline_accuracy(&task).unwrap() / 10.0;
            acc += out.final_row().accuracy / 10.0;
            lowered += usize::from(out.final_row().loss < out.history[0].loss);
        }
        ok &= acc > base && lowered == 10;
        details.push(format!(
            "{p:?} accuracy {acc:.4} vs baseline {base:.4}, loss lowered on {lowered}/10"
        ));
    }
    let elapsed = start.elapsed();
    check(
        ok && elapsed < Duration::from_secs(300),
        format!("{} time={:.1}s", details.join("; "), elapsed.as_secs_f64()),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gcrf"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                found.push((name, fs::read(&path).unwrap()));
            }
        }
    }
    found.sort();
    found
}

fn write_inputs(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = GridGraph::new(5, 5, 3, Stencil::Eight).unwrap();
    let coupled = SparseSym::build_pattern(&g, true);
    let a = random_pairwise(&coupled, 0.1, &mut rng);
    gcrf_core::io::write_system(dir.join("a.txt"), &a).unwrap();
    gcrf_core::io::write_vector(dir.join("b.txt"), &random_vector(g.dim(), &mut rng)).unwrap();
    let shared = random_pairwise(&SparseSym::build_pattern(&g, false), 0.1, &mut rng);
    gcrf_core::io::write_system(dir.join("ahat.txt"), &shared).unwrap();
    gcrf_core::io::write_vector(dir.join("u.txt"), &random_vector(g.dim(), &mut rng)).unwrap();
    let mr = MultiResGraph::from_factors(
        6,
        6,
        2,
        Stencil::Four,
        &[1.0, 0.5, 0.333],
        Coupling::Coupled,
    )
    .unwrap();
    for (s, sg) in mr.scales().iter().enumerate() {
        gcrf_core::io::write_vector(
            dir.join(format!("m{s}.txt")),
            &random_vector(sg.dim(), &mut rng),
        )
        .unwrap();
    }
}

/// Every CLI command produces byte-identical CSV output when rerun.
fn cli_determinism() -> Verdict {
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "bench-solvers",
            "--height",
            "12",
            "--width",
            "10",
            "--labels",
            "3",
            "--count",
            "3",
            "--seed",
            "4",
            "--out",
            "o",
        ],
        vec![
            "bench-solvers",
            "--system",
            "../a.txt",
            "--rhs",
            "../b.txt",
            "--relative",
            "--out",
            "o",
        ],
        vec![
            "infer", "--system", "../a.txt", "--unary", "../b.txt", "--solver", "gmres", "--out",
            "o",
        ],
        vec![
            "infer",
            "--potts",
            "--system",
            "../ahat.txt",
            "--unary",
            "../u.txt",
            "--out",
            "o",
        ],
        vec![
            "infer",
            "--multires",
            "--height",
            "6",
            "--width",
            "6",
            "--labels",
            "2",
            "--coupled",
            "--unary",
            "../m0.txt",
            "--unary",
            "../m1.txt",
            "--unary",
            "../m2.txt",
            "--out",
            "o",
        ],
        vec!["grad-check", "--models", "4", "--seed", "9"],
        vec![
            "train-toy",
            "--height",
            "8",
            "--width",
            "8",
            "--steps",
            "15",
            "--seed",
            "3",
            "--out",
            "o",
        ],
        vec![
            "train-toy",
            "--height",
            "8",
            "--width",
            "8",
            "--steps",
            "15",
            "--potts",
            "--bias",
            "--out",
            "o",
        ],
    ];
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_inputs(root.path());
    let mut csv_count = 0;
    for (k, args) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let dir = root.path().join(format!("c{k}_{rep}"));
            fs::create_dir(&dir).unwrap();
            let stdout = run_cli(args, &dir)?;
            runs.push((stdout, csv_files(&dir)));
        }
        if runs[0] != runs[1] {
            return Err(format!("output of {:?} differs between runs", args[0]));
        }
        csv_count += runs[0].1.len();
    }
    check(
        csv_count > 0,
        format!(
            "{} commands rerun, {csv_count} CSV files identical",
            commands.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("solver ordering", solver_ordering),
        ("mean-field equivalence", meanfield_equivalence),
        ("gradient exactness", gradient_exactness),
        ("shared-pairwise equivalence", potts_equivalence),
        ("shared-pairwise speedup", potts_speedup),
        ("multi-scale agreement", multires_agreement),
        ("toy learning", toy_learning),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (n, (name, criterion)) in criteria.iter().enumerate() {
        let (tag, detail) = match criterion() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {name}: {tag} ({detail})", n + 1);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
