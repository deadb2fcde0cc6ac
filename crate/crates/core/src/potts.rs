//! Shared (Potts-type) pairwise terms.
//!
//! Pixel pair `(p, q)` interacts with strength `Â_pq` whenever the two take
//! different labels and not at all otherwise. The `PL × PL` system then has
//! `λI` diagonal blocks and `Â` in every off-diagonal block, and separates
//! into `L + 1` pixel-sized solves:
//!
//! 1. `(λI + (L−1)Â) S = Σ_i b_i`, with `S = Σ_i x_i`;
//! 2. `(λI − Â) x_k = b_k − Â S` for each class `k`.
//!
//! Both reduced matrices must be positive definite, which holds exactly when
//! every eigenvalue of `Â` lies in `(−λ/(L−1), λ)`. A violation surfaces as
//! [`Error::BreakdownDetected`] from CG, tagged with the failing [`Stage`].

use rayon::prelude::*;

use crate::error::{check_len, Error, Result, Stage};
use crate::field::ScoreField;
use crate::grid::GridGraph;
use crate::solvers::{self, SolveReport, SolverConfig};
use crate::sparse::SparseSym;

#[derive(Debug, Clone)]
pub struct PottsSystem {
    labels: usize,
    lambda: f64,
    shared: SparseSym,
    /// `λI + (L−1)Â`.
    sum_system: SparseSym,
    /// `λI − Â`.
    class_system: SparseSym,
}

/// Per-class vectors from one two-stage solve, with the report of every solve.
#[derive(Debug, Clone)]
pub struct PottsInference {
    /// One vector of length `P` per class.
    pub classes: Vec<Vec<f64>>,
    /// Sum over classes, the intermediate result of the first stage.
    pub sum: Vec<f64>,
    pub sum_report: SolveReport,
    pub class_reports: Vec<SolveReport>,
}

impl PottsInference {
    /// Number of linear solves performed: always `L + 1`.
    pub fn solver_invocations(&self) -> usize {
        1 + self.class_reports.len()
    }

    pub fn into_field(self, graph: GridGraph) -> Result<ScoreField> {
        ScoreField::from_class_vectors(graph, &self.classes)
    }
}

impl PottsSystem {
    /// `shared` is the `P × P` matrix `Â`; its diagonal must be zero.
    pub fn new(shared: SparseSym, labels: usize, lambda: f64) -> Result<Self> {
        if labels == 0 {
            return Err(Error::InvalidConfig(
                "label count must be at least 1".into(),
            ));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        if let Some(p) = (0..shared.dim()).find(|&p| shared.diag(p) != 0.0) {
            return Err(Error::InvalidConfig(format!(
                "shared pairwise matrix must have a zero diagonal (pixel {p})"
            )));
        }
        let sum_system = shared
            .scaled((labels - 1) as f64)
            .add_scaled_identity(lambda);
        let class_system = shared.scaled(-1.0).add_scaled_identity(lambda);
        Ok(Self {
            labels,
            lambda,
            shared,
            sum_system,
            class_system,
        })
    }

    /// Zero pairwise terms on the pixel pattern of `graph`.
    pub fn unary_only(graph: &GridGraph, lambda: f64) -> Result<Self> {
        Self::new(
            SparseSym::build_pattern(graph, false),
            graph.labels(),
            lambda,
        )
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn pixels(&self) -> usize {
        self.shared.dim()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `Â`.
    pub fn shared(&self) -> &SparseSym {
        &self.shared
    }

    pub fn sum_system(&self) -> &SparseSym {
        &self.sum_system
    }

    pub fn class_system(&self) -> &SparseSym {
        &self.class_system
    }

    /// Probes both reduced systems for positive definiteness.
    pub fn validate_spd(&self) -> Result<()> {
        solvers::spd_probe(&self.sum_system).map_err(|e| e.at_stage(Stage::ClassSum))?;
        solvers::spd_probe(&self.class_system).map_err(|e| e.at_stage(Stage::Class(0)))
    }

    /// The equivalent `PL × PL` pairwise matrix: `Â_pq` between `(p, k)` and
    /// `(q, i)` for `k ≠ i`, zero within a label. Indexing is `p · L + l`.
    pub fn expand_general(&self) -> SparseSym {
        let l = self.labels;
        let adjacency: Vec<Vec<usize>> = (0..self.pixels())
            .map(|p| {
                let (cols, _) = self.shared.row(p);
                cols.iter().copied().filter(|&q| q != p).collect()
            })
            .collect();
        let pattern = SparseSym::from_adjacency(&adjacency, l);
        let mut values = Vec::with_capacity(pattern.nnz());
        for row in 0..pattern.dim() {
            let (p, k) = (row / l, row % l);
            let (cols, _) = pattern.row(row);
            values.extend(cols.iter().map(|&col| {
                let (q, i) = (col / l, col % l);
                if p == q || k == i {
                    0.0
                } else {
                    self.shared.get(p, q).expect("expanded pattern follows Â")
                }
            }));
        }
        pattern.with_values(values)
    }

    /// Two-stage solve shared by inference and the unary backward pass.
    fn two_stage(&self, rhs: &[Vec<f64>], cfg: &SolverConfig) -> Result<PottsInference> {
        check_len(self.labels, rhs.len())?;
        let p = self.pixels();
        for r in rhs {
            check_len(p, r.len())?;
        }
        let mut total = vec![0.0; p];
        for r in rhs {
            total.iter_mut().zip(r).for_each(|(t, v)| *t += v);
        }
        let first = solvers::solve(&self.sum_system, &total, None, cfg)
            .map_err(|e| e.at_stage(Stage::ClassSum))?;
        let coupled = self.shared.spmv(&first.x)?;

        let per_class: Vec<_> = rhs
            .par_iter()
            .enumerate()
            .map(|(k, r)| {
                let b: Vec<f64> = r.iter().zip(&coupled).map(|(v, c)| v - c).collect();
                solvers::solve(&self.class_system, &b, None, cfg)
                    .map_err(|e| e.at_stage(Stage::Class(k)))
            })
            .collect();

        let mut classes = Vec::with_capacity(self.labels);
        let mut class_reports = Vec::with_capacity(self.labels);
        for sol in per_class {
            let sol = sol?;
            classes.push(sol.x);
            class_reports.push(sol.report);
        }
        Ok(PottsInference {
            classes,
            sum: first.x,
            sum_report: first.report,
            class_reports,
        })
    }

    /// Per-class scores `x_1 .. x_L` from per-class unaries `b_1 .. b_L`.
    pub fn infer(&self, unaries: &[Vec<f64>], cfg: &SolverConfig) -> Result<PottsInference> {
        self.two_stage(unaries, cfg)
    }

    /// `∂L/∂b_k` from `∂L/∂x_k`, by the same two-stage solve.
    pub fn grad_unary(&self, dl_dx: &[Vec<f64>], cfg: &SolverConfig) -> Result<PottsInference> {
        self.two_stage(dl_dx, cfg)
    }

    /// Gradient with respect to `Â`; see [`potts_grad_pairwise`].
    pub fn grad_pairwise(&self, dl_db: &[Vec<f64>], x: &[Vec<f64>]) -> Result<SparseSym> {
        potts_grad_pairwise(dl_db, x, &self.shared)
    }
}

/// `∂L/∂Â` on the pattern of `Â`.
///
/// Each tied pair `(p, q)`, `p ≠ q`, receives
/// `−Σ_k (∂L/∂b_k[p] · Σ_{i≠k} x_i[q] + ∂L/∂b_k[q] · Σ_{i≠k} x_i[p])`.
/// The leading minus matches the general-path gradient and is confirmed by
/// finite differences. The diagonal of `Â` is fixed at zero, so its gradient is zero.
pub fn potts_grad_pairwise(
    dl_db: &[Vec<f64>],
    x: &[Vec<f64>],
    pattern: &SparseSym,
) -> Result<SparseSym> {
    let labels = x.len();
    check_len(labels, dl_db.len())?;
    let p = pattern.dim();
    for (d, v) in dl_db.iter().zip(x) {
        check_len(p, d.len())?;
        check_len(p, v.len())?;
    }
    let mut total = vec![0.0; p];
    for v in x {
        total.iter_mut().zip(v).for_each(|(t, xi)| *t += xi);
    }
    // others[k][p] = Σ_{i≠k} x_i[p]
    let others: Vec<Vec<f64>> = x
        .iter()
        .map(|xk| total.iter().zip(xk).map(|(t, v)| t - v).collect())
        .collect();

    let mut values = Vec::with_capacity(pattern.nnz());
    for row in 0..p {
        let (cols, _) = pattern.row(row);
        values.extend(cols.iter().map(|&col| {
            if col == row {
                return 0.0;
            }
            let s: f64 = (0..labels)
                .map(|k| dl_db[k][row] * others[k][col] + dl_db[k][col] * others[k][row])
                .sum();
            -s
        }));
    }
    Ok(pattern.with_values(values))
}
