//! Per-pixel softmax cross-entropy and label decoding.

use crate::error::{check_len, Error, Result};
use crate::field::ScoreField;
use crate::grid::GridGraph;

/// One ground-truth class per pixel, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    graph: GridGraph,
    labels: Vec<usize>,
}

impl LabelMap {
    pub fn new(graph: GridGraph, labels: Vec<usize>) -> Result<Self> {
        check_len(graph.pixels(), labels.len())?;
        if let Some(&label) = labels.iter().find(|&&l| l >= graph.labels()) {
            return Err(Error::LabelOutOfRange {
                label,
                labels: graph.labels(),
            });
        }
        Ok(Self { graph, labels })
    }

    pub fn graph(&self) -> &GridGraph {
        &self.graph
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, pixel: usize) -> usize {
        self.labels[pixel]
    }
}

/// Mean over pixels of `−log softmax(x_p)[y_p]`, and its gradient
/// `(softmax(x_p) − onehot(y_p)) / P`.
pub fn softmax_xent(x: &ScoreField, y: &LabelMap) -> Result<(f64, ScoreField)> {
    let g = *x.graph();
    check_len(g.pixels(), y.labels.len())?;
    check_len(g.labels(), y.graph.labels())?;
    let p_count = g.pixels() as f64;
    let mut grad = vec![0.0; g.dim()];
    let mut total = 0.0;
    for p in 0..g.pixels() {
        let scores = x.pixel(p);
        let target = y.labels[p];
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let log_z = z.ln();
        total += -(scores[target] - max - log_z);
        let out = &mut grad[p * g.labels()..(p + 1) * g.labels()];
        for (l, (o, s)) in out.iter_mut().zip(scores).enumerate() {
            let prob = (s - max - log_z).exp();
            let indicator = if l == target { 1.0 } else { 0.0 };
            *o = (prob - indicator) / p_count;
        }
    }
    Ok((total / p_count, ScoreField::new(g, grad)?))
}

/// Highest-scoring label per pixel; ties go to the lowest label.
pub fn argmax_labels(x: &ScoreField) -> LabelMap {
    let g = *x.graph();
    let labels = (0..g.pixels())
        .map(|p| {
            let scores = x.pixel(p);
            let mut best = 0;
            for (l, &s) in scores.iter().enumerate().skip(1) {
                if s > scores[best] {
                    best = l;
                }
            }
            best
        })
        .collect();
    LabelMap { graph: g, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Stencil;
    use proptest::prelude::*;

    fn graph(p: usize, l: usize) -> GridGraph {
        GridGraph::new(1, p, l, Stencil::Four).unwrap()
    }

    #[test]
    fn uniform_two_label_scores() {
        let g = graph(4, 2);
        let x = ScoreField::zeros(g);
        let y = LabelMap::new(g, vec![0, 1, 1, 0]).unwrap();
        let (loss, grad) = softmax_xent(&x, &y).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        for p in 0..4 {
            for l in 0..2 {
                let expect = if l == y.get(p) { -0.5 } else { 0.5 } / 4.0;
                assert!((grad.get(p, l) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn saturated_scores() {
        let g = graph(1, 2);
        let x = ScoreField::new(g, vec![30.0, 0.0]).unwrap();
        let (loss, _) = softmax_xent(&x, &LabelMap::new(g, vec![0]).unwrap()).unwrap();
        assert!(loss < 1e-9);
        // Stable far beyond exp overflow.
        let x = ScoreField::new(g, vec![1e4, -1e4]).unwrap();
        let (loss, grad) = softmax_xent(&x, &LabelMap::new(g, vec![1]).unwrap()).unwrap();
        assert!((loss - 2e4).abs() < 1e-9);
        assert!(grad.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn three_label_example() {
        let g = graph(1, 3);
        let x = ScoreField::new(g, vec![1.0, 2.0, 3.0]).unwrap();
        let (loss, _) = softmax_xent(&x, &LabelMap::new(g, vec![2]).unwrap()).unwrap();
        let direct = -(3f64.exp() / (1f64.exp() + 2f64.exp() + 3f64.exp())).ln();
        assert!((loss - direct).abs() < 1e-14);
        assert!((loss - 0.40761).abs() < 1e-5);
    }

    #[test]
    fn argmax_examples() {
        let g = graph(3, 2);
        let x = ScoreField::new(g, vec![0.1, 0.9, 0.5, 0.5, 2.0, -1.0]).unwrap();
        assert_eq!(argmax_labels(&x).labels(), &[1, 0, 0]);
        assert_eq!(argmax_labels(&ScoreField::zeros(g)).labels(), &[0, 0, 0]);
    }

    #[test]
    fn label_validation() {
        let g = graph(2, 2);
        assert!(matches!(
            LabelMap::new(g, vec![0, 2]),
            Err(Error::LabelOutOfRange {
                label: 2,
                labels: 2
            })
        ));
        assert!(LabelMap::new(g, vec![0]).is_err());
        let other = graph(3, 2);
        let y = LabelMap::new(other, vec![0, 0, 0]).unwrap();
        assert!(softmax_xent(&ScoreField::zeros(g), &y).is_err());
    }

    proptest! {
        #[test]
        fn gradient_rows_sum_to_zero(scores in prop::collection::vec(-20.0f64..20.0, 12), ys in prop::collection::vec(0usize..3, 4)) {
            let g = graph(4, 3);
            let x = ScoreField::new(g, scores).unwrap();
            let y = LabelMap::new(g, ys).unwrap();
            let (_, grad) = softmax_xent(&x, &y).unwrap();
            for p in 0..4 {
                let s: f64 = grad.pixel(p).iter().sum();
                prop_assert!(s.abs() < 1e-12);
                // Probabilities are grad·P + onehot and sum to one.
                let probs: f64 = grad.pixel(p).iter().enumerate()
                    .map(|(l, v)| v * 4.0 + if l == y.get(p) { 1.0 } else { 0.0 }).sum();
                prop_assert!((probs - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn gradient_matches_central_differences(scores in prop::collection::vec(-3.0f64..3.0, 6), ys in prop::collection::vec(0usize..3, 2)) {
            let g = graph(2, 3);
            let y = LabelMap::new(g, ys).unwrap();
            let x = ScoreField::new(g, scores.clone()).unwrap();
            let (_, grad) = softmax_xent(&x, &y).unwrap();
            let h = 1e-6;
            for i in 0..6 {
                let mut up = scores.clone();
                let mut down = scores.clone();
                up[i] += h;
                down[i] -= h;
                let lu = softmax_xent(&ScoreField::new(g, up).unwrap(), &y).unwrap().0;
                let ld = softmax_xent(&ScoreField::new(g, down).unwrap(), &y).unwrap().0;
                let fd = (lu - ld) / (2.0 * h);
                prop_assert!((fd - grad.data()[i]).abs() <= 1e-7, "{} vs {}", fd, grad.data()[i]);
            }
        }

        #[test]
        fn argmax_shift_invariant(scores in prop::collection::vec(-5.0f64..5.0, 8), shift in prop::collection::vec(-100.0f64..100.0, 4)) {
            let g = graph(4, 2);
            let x = ScoreField::new(g, scores.clone()).unwrap();
            let shifted: Vec<f64> = scores.iter().enumerate().map(|(i, s)| s + shift[i / 2]).collect();
            let xs = ScoreField::new(g, shifted).unwrap();
            // Shifting can round away sub-ulp gaps; compare only where the margin is clear.
            let a = argmax_labels(&x);
            let b = argmax_labels(&xs);
            for p in 0..4 {
                if (scores[2 * p] - scores[2 * p + 1]).abs() > 1e-9 {
                    prop_assert_eq!(a.get(p), b.get(p));
                }
            }
        }
    }
}
