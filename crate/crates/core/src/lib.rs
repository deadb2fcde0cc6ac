//! Gaussian-CRF structured prediction posed as quadratic optimization.
//!
//! A hypothesis `x` over `(pixel, label)` pairs has energy
//! `½ xᵀ(A + λI)x − Bᵀx`. With `A + λI` positive definite the minimizer is the
//! unique solution of `(A + λI)x = B`, so inference is a single sparse linear
//! solve and the backward pass is a second solve against the same matrix.
//!
//! Crate layout:
//!
//! * [`grid`], [`sparse`], [`field`]: lattice connectivity, symmetric CSR storage
//!   and score vectors indexed by `(pixel, label)`.
//! * [`solvers`]: Jacobi, Gauss-Seidel, conjugate gradient and restarted GMRES
//!   with per-iteration residual traces, plus the mean-field update.
//! * [`general`]: the fully label-coupled layer (energy, inference, gradients).
//! * [`potts`]: the shared-pairwise layer solved as `L + 1` pixel-sized systems.
//! * [`multires`]: several scales coupled into one block system.
//! * [`loss`], [`trainer`]: softmax cross-entropy and a toy segmentation trainer.
//! * [`gradcheck`]: central finite-difference checks of every analytic gradient.
//! * [`io`]: plain-text matrix and vector files.
//!
//! ```
//! use gcrf_core::{GridGraph, Method, PottsSystem, ScoreField, SolverConfig, SparseSym, Stencil};
//!
//! # fn main() -> gcrf_core::Result<()> {
//! let graph = GridGraph::new(32, 32, 3, Stencil::Four)?;
//! let shared = SparseSym::build_pattern(&graph, false);
//! let potts = PottsSystem::new(shared, graph.labels(), 10.0)?;
//! let b = ScoreField::zeros(graph);
//! let out = potts.infer(&b.class_vectors(), &SolverConfig::new(Method::ConjugateGradient))?;
//! assert_eq!(out.solver_invocations(), 4);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod general;
pub mod gradcheck;
pub mod grid;
pub mod io;
pub mod loss;
pub mod multires;
pub mod potts;
pub mod solvers;
pub mod sparse;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result, Stage};
pub use field::ScoreField;
pub use general::{GeneralQo, PairwiseGrad, QuadraticSystem};
pub use grid::{GridGraph, Stencil};
pub use loss::LabelMap;
pub use multires::{Coupling, CrossLink, MultiResGraph, MultiResSystem};
pub use potts::{PottsInference, PottsSystem};
pub use solvers::{Method, ResidualMode, Solution, SolveReport, SolverConfig};
pub use sparse::SparseSym;
