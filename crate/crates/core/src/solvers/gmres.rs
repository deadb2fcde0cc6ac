//! Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.

use super::{Solution, Trace};
use crate::error::Result;
use crate::sparse::{dot, norm, residual, SparseSym};

pub(super) fn solve_gmres(
    m: &SparseSym,
    b: &[f64],
    mut x: Vec<f64>,
    restart: usize,
    mut trace: Trace,
) -> Result<Solution> {
    let n = m.dim();
    let mut r = residual(m, b, &x);
    let mut beta = norm(&r);
    if trace.start(beta) {
        return trace.finish(x);
    }

    let k_max = restart.min(n.max(1));
    // Column-major Hessenberg: h[j] holds column j (length k_max + 1).
    let mut h = vec![vec![0.0; k_max + 1]; k_max];
    let mut cs = vec![0.0; k_max];
    let mut sn = vec![0.0; k_max];
    let mut g = vec![0.0; k_max + 1];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k_max + 1);

    loop {
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;

        let mut used = 0;
        for j in 0..k_max {
            if trace.exhausted() {
                break;
            }
            let mut w = vec![0.0; n];
            m.spmv_into(&basis[j], &mut w);
            let col = &mut h[j];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let h_next = norm(&w);
            col[j + 1] = h_next;

            for i in 0..j {
                let (a, c) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * c;
                col[i + 1] = -sn[i] * a + cs[i] * c;
            }
            let denom = col[j].hypot(col[j + 1]);
            if denom == 0.0 {
                break;
            }
            cs[j] = col[j] / denom;
            sn[j] = col[j + 1] / denom;
            col[j] = denom;
            col[j + 1] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            used = j + 1;
            let estimate_done = trace.push(g[j + 1].abs());
            // Lucky breakdown: the Krylov space is invariant and holds the solution.
            let lucky = h_next <= 1e-14 * beta;
            if estimate_done || lucky {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        if used > 0 {
            let mut y = vec![0.0; used];
            for i in (0..used).rev() {
                let mut s = g[i];
                for (k, yk) in y.iter().enumerate().skip(i + 1) {
                    s -= h[k][i] * yk;
                }
                y[i] = s / h[i][i];
            }
            for (yk, v) in y.iter().zip(&basis) {
                x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += yk * vi);
            }
        }

        r = residual(m, b, &x);
        beta = norm(&r);
        if trace.amend(beta) || trace.exhausted() || used == 0 || !beta.is_finite() {
            return trace.finish(x);
        }
    }
}
