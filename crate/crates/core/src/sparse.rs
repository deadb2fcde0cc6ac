//! Symmetric sparse matrices in compressed-sparse-row layout.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::grid::GridGraph;

/// Rows above this count are multiplied in parallel.
const PARALLEL_ROWS: usize = 8192;

/// A structurally and numerically symmetric sparse matrix.
///
/// Both triangles are stored. Column indices are strictly increasing within
/// each row and the diagonal is always structurally present, so adding a
/// multiple of the identity never changes the pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl SparseSym {
    /// Assembles a matrix from `(row, col, value)` triplets. Duplicate
    /// coordinates are summed; missing diagonal entries are inserted as zeros.
    /// Fails unless the result is symmetric.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= dim || c >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.max(c) + 1,
                });
            }
        }
        entries.extend((0..dim).map(|i| (i, i, 0.0)));
        entries.sort_by_key(|e| (e.0, e.1));

        let mut row_offsets = vec![0usize; dim + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
                continue;
            }
            row_offsets[r + 1] += 1;
            col_indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..dim {
            row_offsets[i + 1] += row_offsets[i];
        }
        let m = Self::from_raw(dim, row_offsets, col_indices, values);
        m.check_symmetric()?;
        Ok(m)
    }

    /// Builds from CSR arrays already known to be sorted, duplicate-free and to
    /// contain the diagonal.
    fn from_raw(
        dim: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let diag = (0..dim)
            .map(|i| {
                let lo = row_offsets[i];
                let hi = row_offsets[i + 1];
                lo + col_indices[lo..hi]
                    .binary_search(&i)
                    .expect("diagonal is structurally present")
            })
            .collect();
        Self {
            dim,
            row_offsets,
            col_indices,
            values,
            diag,
        }
    }

    /// Zero-valued pattern for a grid.
    ///
    /// With `label_coupled` the matrix has dimension `P · L` and every label
    /// pair at neighbouring pixels interacts (an `L × L` block per edge and
    /// orientation) while a pixel's own labels only meet on the diagonal.
    /// Without it the matrix is the `P × P` pixel adjacency pattern.
    pub fn build_pattern(graph: &GridGraph, label_coupled: bool) -> Self {
        let adjacency: Vec<Vec<usize>> = (0..graph.pixels()).map(|p| graph.neighbors(p)).collect();
        let labels = if label_coupled { graph.labels() } else { 1 };
        Self::from_adjacency(&adjacency, labels)
    }

    /// Zero-valued pattern from per-pixel sorted neighbour lists (no
    /// self-loops), expanded into `labels × labels` blocks.
    pub fn from_adjacency(adjacency: &[Vec<usize>], labels: usize) -> Self {
        let pixels = adjacency.len();
        let dim = pixels * labels;
        let nnz = dim + adjacency.iter().map(Vec::len).sum::<usize>() * labels * labels;
        let mut row_offsets = Vec::with_capacity(dim + 1);
        let mut col_indices = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for (p, neighbours) in adjacency.iter().enumerate() {
            debug_assert!(neighbours.windows(2).all(|w| w[0] < w[1]));
            let split = neighbours.partition_point(|&q| q < p);
            for l in 0..labels {
                for &q in &neighbours[..split] {
                    col_indices.extend((0..labels).map(|k| q * labels + k));
                }
                col_indices.push(p * labels + l);
                for &q in &neighbours[split..] {
                    col_indices.extend((0..labels).map(|k| q * labels + k));
                }
                row_offsets.push(col_indices.len());
            }
        }
        let values = vec![0.0; col_indices.len()];
        Self::from_raw(dim, row_offsets, col_indices, values)
    }

    /// Zero matrix sharing this pattern.
    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    /// Same pattern, new values. The caller guarantees symmetry.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.nnz());
        Self {
            dim: self.dim,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values,
            diag: self.diag.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored entries, both triangles and the diagonal included.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to stored values. Callers must keep the matrix symmetric.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Storage position of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.dim || j >= self.dim {
            return None;
        }
        let lo = self.row_offsets[i];
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.position(i, j).map(|k| self.values[k])
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.values[self.diag[i]]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.diag.iter().map(|&k| self.values[k]).collect()
    }

    /// Writes `value` at `(i, j)` and `(j, i)`.
    pub fn set_symmetric(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let a = self
            .position(i, j)
            .ok_or(Error::OutsidePattern { row: i, col: j })?;
        let b = self
            .position(j, i)
            .ok_or(Error::OutsidePattern { row: j, col: i })?;
        self.values[a] = value;
        self.values[b] = value;
        Ok(())
    }

    /// `(row, col, value)` for every stored entry, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn same_pattern(&self, other: &SparseSym) -> bool {
        self.dim == other.dim
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// Verifies `a(i, j) = a(j, i)` for every stored entry.
    pub fn check_symmetric(&self) -> Result<()> {
        for (i, j, v) in self.iter() {
            if j <= i {
                continue;
            }
            match self.get(j, i) {
                Some(w) if w == v => {}
                _ => return Err(Error::NotSymmetric { row: i, col: j }),
            }
        }
        Ok(())
    }

    /// Sparse matrix-vector product.
    pub fn spmv(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, v.len())?;
        let mut out = vec![0.0; self.dim];
        self.spmv_into(v, &mut out);
        Ok(out)
    }

    /// `out = M v`. Panics if either slice has the wrong length.
    pub fn spmv_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dim, "spmv input length");
        assert_eq!(out.len(), self.dim, "spmv output length");
        let row_dot = |i: usize| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&j, &a)| a * v[j]).sum::<f64>()
        };
        if self.dim >= PARALLEL_ROWS {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(i, o)| *o = row_dot(i));
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = row_dot(i);
            }
        }
    }

    /// `M + λI` on the same pattern.
    pub fn add_scaled_identity(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for &k in &out.diag {
            out.values[k] += lambda;
        }
        out
    }

    /// `α M` on the same pattern.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `self += α · other`; both must share a pattern.
    pub fn add_assign_scaled(&mut self, alpha: f64, other: &SparseSym) -> Result<()> {
        if !self.same_pattern(other) {
            return Err(Error::InvalidConfig(
                "matrices do not share a sparsity pattern".into(),
            ));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Gershgorin lower bound on the smallest eigenvalue:
    /// `min_i (a_ii − Σ_{j≠i} |a_ij|)`.
    pub fn gershgorin_lower_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let (cols, vals) = self.row(i);
                let off: f64 = cols
                    .iter()
                    .zip(vals)
                    .filter(|(&j, _)| j != i)
                    .map(|(_, a)| a.abs())
                    .sum();
                self.diag(i) - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute off-diagonal row sum.
    pub fn max_offdiag_row_sum(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .filter(|(&j, _)| j != i)
                    .map(|(_, a)| a.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Zero-valued grid pattern; see [`SparseSym::build_pattern`].
pub fn build_pattern(graph: &GridGraph, label_coupled: bool) -> SparseSym {
    SparseSym::build_pattern(graph, label_coupled)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `b − M x`.
pub(crate) fn residual(m: &SparseSym, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; b.len()];
    m.spmv_into(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    r
}
