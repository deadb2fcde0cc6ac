#![allow(dead_code)]

use gcrf_core::SparseSym;
use nalgebra::{DMatrix, DVector};

pub fn dense(m: &SparseSym) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.dim(), m.dim());
    for (i, j, v) in m.iter() {
        d[(i, j)] = v;
    }
    d
}

/// Solves `(A + λI) x = b` by Cholesky.
pub fn dense_solve(a: &SparseSym, lambda: f64, b: &[f64]) -> Vec<f64> {
    let n = a.dim();
    let m = dense(a) + DMatrix::identity(n, n) * lambda;
    let chol = m.cholesky().expect("oracle system must be SPD");
    chol.solve(&DVector::from_column_slice(b))
        .as_slice()
        .to_vec()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
