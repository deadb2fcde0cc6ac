//! Central finite-difference checks of the analytic gradients.
//!
//! The loss is softmax cross-entropy applied to the inferred scores. Every
//! unary entry and every stored pairwise entry (mirror entries perturbed
//! together) is nudged by `±step` and the loss re-evaluated through a fresh
//! forward solve. Only the forward path is used for the numerical side.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::ScoreField;
use crate::general::{grad_pairwise, QuadraticSystem};
use crate::grid::{GridGraph, Stencil};
use crate::loss::{softmax_xent, LabelMap};
use crate::potts::PottsSystem;
use crate::solvers::{Method, SolverConfig};
use crate::sparse::SparseSym;
use crate::synth::{dominant_amplitude, random_pairwise, random_vector};

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tolerance: f64,
    /// Lower bound on the denominator of the relative error.
    pub abs_floor: f64,
    pub solver: SolverConfig,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tolerance: 1e-5,
            abs_floor: 1e-8,
            solver: SolverConfig::new(Method::ConjugateGradient).with_tolerance(1e-13),
        }
    }
}

/// Worst-case agreement for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub name: String,
    pub checked: usize,
    pub failures: usize,
    /// Largest `|a − n| / max(|a|, |n|, floor)`.
    pub worst_rel: f64,
    pub worst_abs: f64,
}

impl GroupReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checked: 0,
            failures: 0,
            worst_rel: 0.0,
            worst_abs: 0.0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64, cfg: &GradCheckConfig) {
        self.checked += 1;
        let diff = (analytic - numeric).abs();
        self.worst_abs = self.worst_abs.max(diff);
        let rel = diff / analytic.abs().max(numeric.abs()).max(cfg.abs_floor);
        self.worst_rel = self.worst_rel.max(rel);
        if !(rel <= cfg.rel_tolerance) {
            self.failures += 1;
        }
    }

    fn merge(&mut self, other: &GroupReport) {
        self.checked += other.checked;
        self.failures += other.failures;
        self.worst_rel = self.worst_rel.max(other.worst_rel);
        self.worst_abs = self.worst_abs.max(other.worst_abs);
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for GroupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} checked={:<6} worst_rel={:.3e} worst_abs={:.3e} failures={}",
            self.name, self.checked, self.worst_rel, self.worst_abs, self.failures
        )
    }
}

/// Groups merged by name across many models.
#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
    pub models: usize,
}

impl GradCheckReport {
    pub fn add(&mut self, group: GroupReport) {
        match self.groups.iter_mut().find(|g| g.name == group.name) {
            Some(g) => g.merge(&group),
            None => self.groups.push(group),
        }
    }

    pub fn passed(&self) -> bool {
        self.groups.iter().all(GroupReport::passed)
    }

    pub fn worst_rel(&self) -> f64 {
        self.groups.iter().map(|g| g.worst_rel).fold(0.0, f64::max)
    }
}

fn central<F: FnMut(f64) -> Result<f64>>(mut loss_at: F, h: f64) -> Result<f64> {
    Ok((loss_at(h)? - loss_at(-h)?) / (2.0 * h))
}

/// Checks the general layer on one model. Returns `(unary, pairwise)` groups.
pub fn check_general(
    graph: GridGraph,
    pairwise: &SparseSym,
    lambda: f64,
    b: &[f64],
    y: &LabelMap,
    cfg: &GradCheckConfig,
) -> Result<(GroupReport, GroupReport)> {
    let loss_of = |a: &SparseSym, b: &[f64]| -> Result<f64> {
        let x = QuadraticSystem::new(a.clone(), lambda)?
            .infer(b, &cfg.solver)?
            .x;
        Ok(softmax_xent(&ScoreField::new(graph, x)?, y)?.0)
    };

    let sys = QuadraticSystem::new(pairwise.clone(), lambda)?;
    let x = sys.infer(b, &cfg.solver)?.x;
    let (_, dl_dx) = softmax_xent(&ScoreField::new(graph, x.clone())?, y)?;
    let dl_db = sys.grad_unary(dl_dx.data(), &cfg.solver)?.x;
    let dl_da = grad_pairwise(&dl_db, &x, pairwise)?;

    let mut unary = GroupReport::new("general/unary");
    for i in 0..b.len() {
        let fd = central(
            |h| {
                let mut bp = b.to_vec();
                bp[i] += h;
                loss_of(pairwise, &bp)
            },
            cfg.step,
        )?;
        unary.record(dl_db[i], fd, cfg);
    }

    let mut pair = GroupReport::new("general/pairwise");
    let tied: Vec<(usize, usize, f64)> = pairwise.iter().filter(|(i, j, _)| i <= j).collect();
    for (i, j, v) in tied {
        let fd = central(
            |h| {
                let mut a = pairwise.clone();
                a.set_symmetric(i, j, v + h)?;
                loss_of(&a, b)
            },
            cfg.step,
        )?;
        pair.record(dl_da.get(i, j).expect("pattern entry"), fd, cfg);
    }
    Ok((unary, pair))
}

/// Checks the shared-pairwise layer on one model. `unaries` are per class.
pub fn check_potts(
    graph: GridGraph,
    shared: &SparseSym,
    lambda: f64,
    unaries: &[Vec<f64>],
    y: &LabelMap,
    cfg: &GradCheckConfig,
) -> Result<(GroupReport, GroupReport)> {
    let labels = graph.labels();
    let loss_of = |a: &SparseSym, b: &[Vec<f64>]| -> Result<f64> {
        let out = PottsSystem::new(a.clone(), labels, lambda)?.infer(b, &cfg.solver)?;
        Ok(softmax_xent(&out.into_field(graph)?, y)?.0)
    };

    let sys = PottsSystem::new(shared.clone(), labels, lambda)?;
    let x = sys.infer(unaries, &cfg.solver)?.classes;
    let (_, dl_dx) = softmax_xent(&ScoreField::from_class_vectors(graph, &x)?, y)?;
    let dl_db = sys.grad_unary(&dl_dx.class_vectors(), &cfg.solver)?.classes;
    let dl_da = sys.grad_pairwise(&dl_db, &x)?;

    let mut unary = GroupReport::new("potts/unary");
    for k in 0..labels {
        for p in 0..graph.pixels() {
            let fd = central(
                |h| {
                    let mut bp = unaries.to_vec();
                    bp[k][p] += h;
                    loss_of(shared, &bp)
                },
                cfg.step,
            )?;
            unary.record(dl_db[k][p], fd, cfg);
        }
    }

    let mut pair = GroupReport::new("potts/pairwise");
    let tied: Vec<(usize, usize, f64)> = shared.iter().filter(|(i, j, _)| i < j).collect();
    for (i, j, v) in tied {
        let fd = central(
            |h| {
                let mut a = shared.clone();
                a.set_symmetric(i, j, v + h)?;
                loss_of(&a, unaries)
            },
            cfg.step,
        )?;
        pair.record(dl_da.get(i, j).expect("pattern entry"), fd, cfg);
    }
    Ok((unary, pair))
}

/// A random small model: grid of at most 16 pixels, up to 3 labels.
#[derive(Debug, Clone)]
pub struct RandomModel {
    pub graph: GridGraph,
    pub lambda: f64,
    pub labels: LabelMap,
    /// Label-coupled pairwise matrix for the general layer.
    pub pairwise: SparseSym,
    /// Pixel-level shared matrix for the Potts layer.
    pub shared: SparseSym,
    /// Pixel-major unaries, length `P · L`.
    pub unaries: Vec<f64>,
}

pub fn random_model<R: Rng + ?Sized>(rng: &mut R, stencil: Stencil) -> Result<RandomModel> {
    let h = rng.random_range(1..=4);
    let w = rng.random_range(if h == 1 { 2 } else { 1 }..=4);
    let l = rng.random_range(1..=3);
    let graph = GridGraph::new(h, w, l, stencil)?;
    let lambda = rng.random_range(1.0..4.0);

    let coupled = SparseSym::build_pattern(&graph, true);
    let amp = dominant_amplitude(&coupled, lambda, 0.6);
    let pairwise = random_pairwise(&coupled, amp, rng);

    let pixels = SparseSym::build_pattern(&graph, false);
    let shared_amp = dominant_amplitude(&pixels, lambda, 0.6) / (l.max(2) - 1) as f64;
    let shared = random_pairwise(&pixels, shared_amp, rng);

    let unaries: Vec<f64> = random_vector(graph.dim(), rng)
        .into_iter()
        .map(|v| 2.0 * v)
        .collect();
    let labels = LabelMap::new(
        graph,
        (0..graph.pixels())
            .map(|_| rng.random_range(0..l))
            .collect(),
    )?;
    Ok(RandomModel {
        graph,
        lambda,
        labels,
        pairwise,
        shared,
        unaries,
    })
}

/// Runs both layers on `count` random models, cycling through the three stencils.
pub fn random_suite(count: usize, seed: u64, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stencils = [Stencil::Four, Stencil::Eight, Stencil::Twelve];
    let mut report = GradCheckReport::default();
    for n in 0..count {
        let m = random_model(&mut rng, stencils[n % 3])?;
        let (u, p) = check_general(m.graph, &m.pairwise, m.lambda, &m.unaries, &m.labels, cfg)?;
        report.add(u);
        report.add(p);
        let classes = ScoreField::new(m.graph, m.unaries.clone())?.class_vectors();
        let (u, p) = check_potts(m.graph, &m.shared, m.lambda, &classes, &m.labels, cfg)?;
        report.add(u);
        report.add(p);
        report.models += 1;
    }
    Ok(report)
}
