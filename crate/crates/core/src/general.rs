//! The fully label-coupled quadratic layer.
//!
//! Energy `E(x) = ½ xᵀ(A + λI)x − Bᵀx`; inference solves `(A + λI)x = B`.
//! Backward: `(A + λI) ∂L/∂B = ∂L/∂x` and `∂L/∂A = −∂L/∂B ⊗ x` restricted to
//! the stored pattern of `A`.

use tracing::warn;

use crate::error::{check_len, Error, Result};
use crate::field::ScoreField;
use crate::grid::GridGraph;
use crate::solvers::{self, Solution, SolveReport, SolverConfig};
use crate::sparse::{dot, SparseSym};

/// `A` and `λ` with the cached system matrix `A + λI`.
///
/// Works on flat vectors so the same machinery serves single grids,
/// block expansions and multi-resolution systems.
#[derive(Debug, Clone)]
pub struct QuadraticSystem {
    pairwise: SparseSym,
    lambda: f64,
    system: SparseSym,
}

impl QuadraticSystem {
    pub fn new(pairwise: SparseSym, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        let system = pairwise.add_scaled_identity(lambda);
        if system.gershgorin_lower_bound() <= 0.0 {
            warn!(
                lambda,
                "A + λI is not diagonally dominant; positive definiteness is checked by the solver"
            );
        }
        Ok(Self {
            pairwise,
            lambda,
            system,
        })
    }

    pub fn pairwise(&self) -> &SparseSym {
        &self.pairwise
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `A + λI`.
    pub fn system(&self) -> &SparseSym {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Runs [`solvers::spd_probe`] on `A + λI`.
    pub fn validate_spd(&self) -> Result<()> {
        solvers::spd_probe(&self.system)
    }

    /// `½ xᵀ(A + λI)x − Bᵀx`.
    pub fn energy(&self, x: &[f64], b: &[f64]) -> Result<f64> {
        check_len(self.dim(), b.len())?;
        let mx = self.system.spmv(x)?;
        Ok(0.5 * dot(x, &mx) - dot(b, x))
    }

    /// Minimizer of the energy: the solution of `(A + λI)x = B`.
    pub fn infer(&self, b: &[f64], cfg: &SolverConfig) -> Result<Solution> {
        solvers::solve(&self.system, b, None, cfg)
    }

    /// `∂L/∂B` from `∂L/∂x`. `A` is symmetric, so no transpose is needed.
    pub fn grad_unary(&self, dl_dx: &[f64], cfg: &SolverConfig) -> Result<Solution> {
        solvers::solve(&self.system, dl_dx, None, cfg)
    }
}

/// `∂L/∂A` on the pattern of `A`.
///
/// Entry `(i, j)` and its mirror are one tied parameter, so an off-diagonal
/// entry holds `−(∂L/∂B_i x_j + ∂L/∂B_j x_i)`; diagonal entries hold
/// `−∂L/∂B_i x_i`.
pub fn grad_pairwise(dl_db: &[f64], x: &[f64], pattern: &SparseSym) -> Result<SparseSym> {
    check_len(pattern.dim(), dl_db.len())?;
    check_len(pattern.dim(), x.len())?;
    let mut values = Vec::with_capacity(pattern.nnz());
    for i in 0..pattern.dim() {
        let (cols, _) = pattern.row(i);
        values.extend(cols.iter().map(|&j| {
            if i == j {
                -dl_db[i] * x[i]
            } else {
                -(dl_db[i] * x[j] + dl_db[j] * x[i])
            }
        }));
    }
    Ok(pattern.with_values(values))
}

/// Gradient of the loss with respect to the stored entries of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseGrad(pub SparseSym);

impl PairwiseGrad {
    pub fn matrix(&self) -> &SparseSym {
        &self.0
    }

    pub fn into_inner(self) -> SparseSym {
        self.0
    }
}

/// The label-coupled layer on a single grid.
#[derive(Debug, Clone)]
pub struct GeneralQo {
    graph: GridGraph,
    system: QuadraticSystem,
}

impl GeneralQo {
    /// `pairwise` must have dimension `P · L` (usually the label-coupled grid pattern).
    pub fn new(graph: GridGraph, pairwise: SparseSym, lambda: f64) -> Result<Self> {
        check_len(graph.dim(), pairwise.dim())?;
        Ok(Self {
            graph,
            system: QuadraticSystem::new(pairwise, lambda)?,
        })
    }

    /// `A = 0` on the label-coupled pattern of `graph`.
    pub fn unary_only(graph: GridGraph, lambda: f64) -> Result<Self> {
        Self::new(graph, SparseSym::build_pattern(&graph, true), lambda)
    }

    pub fn graph(&self) -> &GridGraph {
        &self.graph
    }

    pub fn system(&self) -> &QuadraticSystem {
        &self.system
    }

    pub fn pairwise(&self) -> &SparseSym {
        self.system.pairwise()
    }

    pub fn lambda(&self) -> f64 {
        self.system.lambda()
    }

    pub fn energy(&self, x: &ScoreField, b: &ScoreField) -> Result<f64> {
        check_len(self.graph.dim(), x.data().len())?;
        self.system.energy(x.data(), b.data())
    }

    pub fn infer(&self, b: &ScoreField, cfg: &SolverConfig) -> Result<(ScoreField, SolveReport)> {
        check_len(self.graph.dim(), b.data().len())?;
        let sol = self.system.infer(b.data(), cfg)?;
        Ok((ScoreField::new(self.graph, sol.x)?, sol.report))
    }

    pub fn grad_unary(
        &self,
        dl_dx: &ScoreField,
        cfg: &SolverConfig,
    ) -> Result<(ScoreField, SolveReport)> {
        check_len(self.graph.dim(), dl_dx.data().len())?;
        let sol = self.system.grad_unary(dl_dx.data(), cfg)?;
        Ok((ScoreField::new(self.graph, sol.x)?, sol.report))
    }

    pub fn grad_pairwise(&self, dl_db: &ScoreField, x: &ScoreField) -> Result<PairwiseGrad> {
        grad_pairwise(dl_db.data(), x.data(), self.pairwise()).map(PairwiseGrad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Stencil;
    use crate::solvers::Method;

    fn tight() -> SolverConfig {
        SolverConfig::default().with_tolerance(1e-12)
    }

    fn line(a: f64, lambda: f64) -> GeneralQo {
        let g = GridGraph::new(2, 1, 1, Stencil::Four).unwrap();
        let mut pat = SparseSym::build_pattern(&g, true);
        pat.set_symmetric(0, 1, a).unwrap();
        GeneralQo::new(g, pat, lambda).unwrap()
    }

    fn field(g: GridGraph, v: Vec<f64>) -> ScoreField {
        ScoreField::new(g, v).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = GridGraph::new(1, 2, 1, Stencil::Four).unwrap();
        let one = GeneralQo::unary_only(g, 1.0).unwrap();
        let x = field(g, vec![0.3, -2.0]);
        let zero = ScoreField::zeros(g);
        assert!((one.energy(&x, &zero).unwrap() - 0.5 * (0.09 + 4.0)).abs() < 1e-15);
        assert_eq!(one.energy(&zero, &x).unwrap(), 0.0);

        let two = GeneralQo::unary_only(g, 2.0).unwrap();
        let e = two
            .energy(&field(g, vec![1.0, 0.0]), &field(g, vec![1.0, 1.0]))
            .unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn unary_only_inference_scales() {
        let g = GridGraph::new(2, 3, 2, Stencil::Eight).unwrap();
        let qo = GeneralQo::unary_only(g, 4.0).unwrap();
        let b = field(g, (0..12).map(|i| i as f64 - 3.0).collect());
        let (x, _) = qo.infer(&b, &tight()).unwrap();
        for (xi, bi) in x.data().iter().zip(b.data()) {
            assert!((xi - bi / 4.0).abs() < 1e-12);
        }
        let (db, _) = qo.grad_unary(&b, &tight()).unwrap();
        assert_eq!(db, x);
        let (z, _) = qo.infer(&ScoreField::zeros(g), &tight()).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_edge_matches_two_by_two() {
        let (a, lambda) = (0.7, 3.0);
        let qo = line(a, lambda);
        let b = field(*qo.graph(), vec![1.0, -2.0]);
        let (x, _) = qo.infer(&b, &tight()).unwrap();
        // Cramer's rule on [[λ, a], [a, λ]].
        let det = lambda * lambda - a * a;
        let expect = [
            (lambda * 1.0 - a * -2.0) / det,
            (lambda * -2.0 - a * 1.0) / det,
        ];
        assert!((x.data()[0] - expect[0]).abs() < 1e-12);
        assert!((x.data()[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn pairwise_gradient_zero_cases() {
        let qo = line(0.3, 2.0);
        let g = *qo.graph();
        let some = field(g, vec![0.5, -1.0]);
        let zero = ScoreField::zeros(g);
        let a = qo.grad_pairwise(&zero, &some).unwrap();
        let b = qo.grad_pairwise(&some, &zero).unwrap();
        assert!(a.matrix().values().iter().all(|&v| v == 0.0));
        assert!(b.matrix().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pairwise_gradient_entries() {
        let qo = line(0.3, 2.0);
        let g = *qo.graph();
        let db = field(g, vec![2.0, 3.0]);
        let x = field(g, vec![5.0, 7.0]);
        let grad = qo.grad_pairwise(&db, &x).unwrap().into_inner();
        assert_eq!(grad.get(0, 1), Some(-(2.0 * 7.0 + 3.0 * 5.0)));
        assert_eq!(grad.get(1, 0), grad.get(0, 1));
        assert_eq!(grad.get(0, 0), Some(-10.0));
        assert_eq!(grad.get(1, 1), Some(-21.0));
    }

    #[test]
    fn rejects_bad_lambda_and_dims() {
        let g = GridGraph::new(2, 2, 2, Stencil::Four).unwrap();
        assert!(GeneralQo::unary_only(g, 0.0).is_err());
        assert!(GeneralQo::unary_only(g, f64::NAN).is_err());
        let wrong = SparseSym::build_pattern(&g, false);
        assert!(matches!(
            GeneralQo::new(g, wrong, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let qo = GeneralQo::unary_only(g, 1.0).unwrap();
        let small = GridGraph::new(1, 2, 2, Stencil::Four).unwrap();
        assert!(qo.infer(&ScoreField::zeros(small), &tight()).is_err());
    }

    #[test]
    fn methods_agree() {
        let g = GridGraph::new(3, 3, 2, Stencil::Four).unwrap();
        let mut pat = SparseSym::build_pattern(&g, true);
        let entries: Vec<_> = pat.iter().filter(|(i, j, _)| i < j).collect();
        for (n, (i, j, _)) in entries.into_iter().enumerate() {
            pat.set_symmetric(i, j, 0.1 * ((n % 5) as f64 - 2.0))
                .unwrap();
        }
        let qo = GeneralQo::new(g, pat, 5.0).unwrap();
        let b = field(g, (0..18).map(|i| (i as f64 * 0.7).cos()).collect());
        let cfg = SolverConfig::default().with_tolerance(1e-10);
        let (reference, _) = qo.infer(&b, &cfg).unwrap();
        for method in Method::ALL {
            let (x, _) = qo
                .infer(
                    &b,
                    &SolverConfig {
                        method,
                        ..cfg.clone()
                    },
                )
                .unwrap();
            for (u, v) in x.data().iter().zip(reference.data()) {
                assert!((u - v).abs() < 1e-9, "{method}");
            }
        }
    }
}
