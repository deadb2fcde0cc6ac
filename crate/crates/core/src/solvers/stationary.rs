//! Jacobi and Gauss-Seidel sweeps, and the Gaussian mean-field update they
//! coincide with.

use rayon::prelude::*;

use super::{check_diagonal, Solution, Trace};
use crate::error::{check_len, Result};
use crate::sparse::{norm, residual, SparseSym};

const PARALLEL_ROWS: usize = 8192;

/// `Σ_{j≠i} a_ij v_j`, accumulated in ascending column order.
#[inline]
fn offdiag_dot(m: &SparseSym, i: usize, v: &[f64]) -> f64 {
    let (cols, vals) = m.row(i);
    let mut s = 0.0;
    for (&j, &a) in cols.iter().zip(vals) {
        if j != i {
            s += a * v[j];
        }
    }
    s
}

fn jacobi_sweep(m: &SparseSym, b: &[f64], x: &[f64], out: &mut [f64]) {
    let update = |i: usize| (b[i] - offdiag_dot(m, i, x)) / m.diag(i);
    if m.dim() >= PARALLEL_ROWS {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = update(i));
    } else {
        out.iter_mut().enumerate().for_each(|(i, o)| *o = update(i));
    }
}

/// In-place sweep in ascending index order. Each row reads the entries already
/// updated in this sweep, so the loop is inherently sequential.
fn gauss_seidel_sweep(m: &SparseSym, b: &[f64], x: &mut [f64]) {
    for i in 0..m.dim() {
        x[i] = (b[i] - offdiag_dot(m, i, x)) / m.diag(i);
    }
}

/// One Jacobi iteration: every component is computed from `x` alone.
pub fn jacobi_step(m: &SparseSym, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_len(m.dim(), b.len())?;
    check_len(m.dim(), x.len())?;
    check_diagonal(m)?;
    let mut out = vec![0.0; m.dim()];
    jacobi_sweep(m, b, x, &mut out);
    Ok(out)
}

/// One Gauss-Seidel iteration using the freshest estimate of every component.
pub fn gauss_seidel_step(m: &SparseSym, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_len(m.dim(), b.len())?;
    check_len(m.dim(), x.len())?;
    check_diagonal(m)?;
    let mut out = x.to_vec();
    gauss_seidel_sweep(m, b, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanFieldMode {
    /// All means updated from the previous iterate.
    Parallel,
    /// Means updated one at a time in ascending order, in place.
    Sequential,
}

/// Mean-field update for a Gaussian in canonical form with precision `theta_mat`
/// and linear term `theta`:
/// `μ_i ← −(θ_i + Σ_{j≠i} Θ_ij μ_j) / Θ_ii`.
pub fn meanfield_update(
    theta_mat: &SparseSym,
    theta: &[f64],
    mu: &[f64],
    mode: MeanFieldMode,
) -> Result<Vec<f64>> {
    let n = theta_mat.dim();
    check_len(n, theta.len())?;
    check_len(n, mu.len())?;
    check_diagonal(theta_mat)?;
    let mean = |i: usize, current: &[f64]| {
        -(theta[i] + offdiag_dot(theta_mat, i, current)) / theta_mat.diag(i)
    };
    match mode {
        MeanFieldMode::Parallel => Ok((0..n).map(|i| mean(i, mu)).collect()),
        MeanFieldMode::Sequential => {
            let mut next = mu.to_vec();
            for i in 0..n {
                next[i] = mean(i, &next);
            }
            Ok(next)
        }
    }
}

fn run_stationary(
    m: &SparseSym,
    b: &[f64],
    mut x: Vec<f64>,
    mut trace: Trace,
    mut sweep: impl FnMut(&[f64], &mut Vec<f64>),
) -> Result<Solution> {
    check_diagonal(m)?;
    let r0 = norm(&residual(m, b, &x));
    if trace.start(r0) {
        return trace.finish(x);
    }
    let mut best = (r0, x.clone());
    let mut next = vec![0.0; m.dim()];
    while !trace.exhausted() {
        sweep(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        let r = norm(&residual(m, b, &x));
        let done = trace.push(r);
        if done {
            return trace.finish(x);
        }
        if !r.is_finite() {
            break;
        }
        if r < best.0 {
            best = (r, x.clone());
        }
    }
    // The trace keeps every recorded residual; the returned iterate is the best one.
    trace.finish(best.1)
}

pub(super) fn solve_jacobi(
    m: &SparseSym,
    b: &[f64],
    x0: Vec<f64>,
    trace: Trace,
) -> Result<Solution> {
    run_stationary(m, b, x0, trace, |x, next| jacobi_sweep(m, b, x, next))
}

pub(super) fn solve_gauss_seidel(
    m: &SparseSym,
    b: &[f64],
    x0: Vec<f64>,
    trace: Trace,
) -> Result<Solution> {
    run_stationary(m, b, x0, trace, |x, next| {
        next.copy_from_slice(x);
        gauss_seidel_sweep(m, b, next);
    })
}
