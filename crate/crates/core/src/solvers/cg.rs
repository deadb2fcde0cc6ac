//! Unpreconditioned conjugate gradient.

use super::{Solution, Trace};
use crate::error::{Error, Result};
use crate::sparse::{dot, norm, residual, SparseSym};

pub(super) fn solve_cg(
    m: &SparseSym,
    b: &[f64],
    mut x: Vec<f64>,
    mut trace: Trace,
) -> Result<Solution> {
    let n = m.dim();
    let mut r = residual(m, b, &x);
    let mut rr = dot(&r, &r);
    if trace.start(rr.sqrt()) {
        return trace.finish(x);
    }
    let mut p = r.clone();
    let mut mp = vec![0.0; n];
    while !trace.exhausted() {
        m.spmv_into(&p, &mut mp);
        let curvature = dot(&p, &mp);
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(Error::BreakdownDetected {
                iteration: trace.report.iterations + 1,
                curvature,
            });
        }
        let alpha = rr / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        let rr_next = dot(&r, &r);
        if trace.push(rr_next.sqrt()) {
            // The recursive residual drifts from b − Mx; confirm before stopping.
            let true_r = residual(m, b, &x);
            if trace.amend(norm(&true_r)) {
                return trace.finish(x);
            }
            r = true_r;
            rr = dot(&r, &r);
            p.copy_from_slice(&r);
            continue;
        }
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    trace.finish(x)
}
