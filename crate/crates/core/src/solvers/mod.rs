//! Iterative solvers for `M x = b` with per-iteration residual traces.
//!
//! All four methods share [`solve`]. Residuals are Euclidean norms of
//! `b − M x`, absolute by default, and none of the methods is preconditioned.

mod cg;
mod gmres;
mod stationary;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::sparse::{norm, SparseSym};

pub use stationary::{gauss_seidel_step, jacobi_step, meanfield_update, MeanFieldMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Jacobi,
    GaussSeidel,
    ConjugateGradient,
    Gmres,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Jacobi,
        Method::GaussSeidel,
        Method::ConjugateGradient,
        Method::Gmres,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Jacobi => "jacobi",
            Method::GaussSeidel => "gauss-seidel",
            Method::ConjugateGradient => "cg",
            Method::Gmres => "gmres",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jacobi" => Ok(Method::Jacobi),
            "gauss-seidel" | "gaussseidel" | "gs" => Ok(Method::GaussSeidel),
            "cg" | "conjugate-gradient" => Ok(Method::ConjugateGradient),
            "gmres" => Ok(Method::Gmres),
            other => Err(Error::InvalidConfig(format!("unknown solver {other:?}"))),
        }
    }
}

/// Whether the tolerance bounds `‖b − Mx‖` or `‖b − Mx‖ / ‖b‖`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMode {
    #[default]
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub tolerance: f64,
    /// `None` means `10 · N`.
    pub max_iterations: Option<usize>,
    /// Krylov subspace size before GMRES restarts.
    pub gmres_restart: usize,
    pub residual_mode: ResidualMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::ConjugateGradient,
            tolerance: 1e-6,
            max_iterations: None,
            gmres_restart: 30,
            residual_mode: ResidualMode::Absolute,
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = Some(max_iterations);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if self.gmres_restart == 0 {
            return Err(Error::InvalidConfig(
                "gmres_restart must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn iteration_budget(&self, dim: usize) -> usize {
        self.max_iterations.unwrap_or(10 * dim.max(1))
    }
}

/// Convergence record of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// Residual after the starting guess, before any iteration.
    pub initial_residual: f64,
    /// Residual after each iteration; `residuals.len() == iterations`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub tolerance: f64,
    pub residual_mode: ResidualMode,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals
            .last()
            .copied()
            .unwrap_or(self.initial_residual)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub report: SolveReport,
}

/// Shared bookkeeping for the solver loops.
pub(crate) struct Trace {
    scale: f64,
    tolerance: f64,
    pub(crate) budget: usize,
    report: SolveReport,
}

impl Trace {
    fn new(cfg: &SolverConfig, b: &[f64]) -> Self {
        let scale = match cfg.residual_mode {
            ResidualMode::Absolute => 1.0,
            ResidualMode::Relative => {
                let nb = norm(b);
                if nb > 0.0 {
                    nb
                } else {
                    1.0
                }
            }
        };
        Self {
            scale,
            tolerance: cfg.tolerance,
            budget: cfg.iteration_budget(b.len()),
            report: SolveReport {
                method: cfg.method,
                iterations: 0,
                initial_residual: f64::NAN,
                residuals: Vec::new(),
                converged: false,
                tolerance: cfg.tolerance,
                residual_mode: cfg.residual_mode,
            },
        }
    }

    /// Records the starting residual; true when the guess already satisfies the tolerance.
    fn start(&mut self, residual_norm: f64) -> bool {
        let r = residual_norm / self.scale;
        self.report.initial_residual = r;
        r <= self.tolerance
    }

    /// Records one iteration; true once the tolerance is met.
    fn push(&mut self, residual_norm: f64) -> bool {
        let r = residual_norm / self.scale;
        self.report.residuals.push(r);
        self.report.iterations += 1;
        r <= self.tolerance
    }

    /// Overwrites the latest record (used when an estimate is replaced by the true residual).
    fn amend(&mut self, residual_norm: f64) -> bool {
        let r = residual_norm / self.scale;
        match self.report.residuals.last_mut() {
            Some(last) => *last = r,
            None => self.report.initial_residual = r,
        }
        r <= self.tolerance
    }

    fn exhausted(&self) -> bool {
        self.report.iterations >= self.budget
    }

    fn finish(mut self, x: Vec<f64>) -> Result<Solution> {
        let converged = self.report.final_residual() <= self.tolerance;
        self.report.converged = converged;
        let solution = Solution {
            x,
            report: self.report,
        };
        if converged {
            Ok(solution)
        } else {
            Err(Error::NotConverged(Box::new(solution)))
        }
    }
}

/// Solves `M x = b` from `x0` (zero when `None`).
///
/// Returns [`Error::NotConverged`] carrying the best iterate when the
/// iteration budget runs out, [`Error::ZeroDiagonal`] for the stationary
/// methods and [`Error::BreakdownDetected`] when CG meets non-positive curvature.
pub fn solve(m: &SparseSym, b: &[f64], x0: Option<&[f64]>, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    check_len(m.dim(), b.len())?;
    let x0 = match x0 {
        Some(x0) => {
            check_len(m.dim(), x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; m.dim()],
    };
    let trace = Trace::new(cfg, b);
    match cfg.method {
        Method::Jacobi => stationary::solve_jacobi(m, b, x0, trace),
        Method::GaussSeidel => stationary::solve_gauss_seidel(m, b, x0, trace),
        Method::ConjugateGradient => cg::solve_cg(m, b, x0, trace),
        Method::Gmres => gmres::solve_gmres(m, b, x0, cfg.gmres_restart, trace),
    }
}

/// Checks that `m` behaves as positive definite.
///
/// A strictly positive Gershgorin bound certifies it outright; otherwise CG is
/// run on a fixed pseudo-random right-hand side and any non-positive
/// curvature is reported as [`Error::BreakdownDetected`]. Failing to converge
/// within the probe's budget is not treated as evidence either way.
pub fn spd_probe(m: &SparseSym) -> Result<()> {
    if m.gershgorin_lower_bound() > 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let b: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cfg = SolverConfig {
        method: Method::ConjugateGradient,
        tolerance: 1e-10,
        max_iterations: Some(2 * m.dim() + 10),
        gmres_restart: 30,
        residual_mode: ResidualMode::Relative,
    };
    match solve(m, &b, None, &cfg) {
        Ok(_) | Err(Error::NotConverged(_)) => Ok(()),
        Err(e) => Err(e),
    }
}

pub(crate) fn check_diagonal(m: &SparseSym) -> Result<()> {
    match (0..m.dim()).find(|&i| m.diag(i) == 0.0) {
        Some(row) => Err(Error::ZeroDiagonal { row }),
        None => Ok(()),
    }
}
