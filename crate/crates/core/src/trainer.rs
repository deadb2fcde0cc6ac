//! Synthetic segmentation tasks and a plain gradient-descent trainer.
//!
//! Unary evidence is a noisy one-hot encoding of the true labels with a
//! fraction of pixels blanked out. Training learns the off-diagonal pairwise
//! values (and optionally a per-label unary bias) through the inference layer.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tracing::warn;

use crate::error::{check_len, Error, Result};
use crate::field::ScoreField;
use crate::general::{grad_pairwise, QuadraticSystem};
use crate::grid::GridGraph;
use crate::loss::{argmax_labels, softmax_xent, LabelMap};
use crate::potts::PottsSystem;
use crate::solvers::{spd_probe, Method, SolverConfig};
use crate::sparse::SparseSym;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTask {
    pub seed: u64,
    pub graph: GridGraph,
    pub margin: f64,
    pub unary_noise: f64,
    pub occlusion_rate: f64,
}

impl SyntheticTask {
    pub fn new(seed: u64, graph: GridGraph, unary_noise: f64, occlusion_rate: f64) -> Result<Self> {
        let task = Self {
            seed,
            graph,
            margin: 1.0,
            unary_noise,
            occlusion_rate,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.occlusion_rate) {
            return Err(Error::InvalidConfig(format!(
                "occlusion rate must lie in [0, 1), got {}",
                self.occlusion_rate
            )));
        }
        if !(self.unary_noise >= 0.0) || !self.unary_noise.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "unary noise must be non-negative, got {}",
                self.unary_noise
            )));
        }
        if !self.margin.is_finite() {
            return Err(Error::InvalidConfig("margin must be finite".into()));
        }
        Ok(())
    }

    /// Noisy unaries `B0` and the true labels.
    pub fn generate(&self) -> Result<(ScoreField, LabelMap)> {
        self.validate()?;
        let g = self.graph;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let truth = if rng.random_bool(0.5) {
            blob_labels(&g, &mut rng)
        } else {
            stripe_labels(&g, &mut rng)
        };
        let y = LabelMap::new(g, truth)?;

        let noise = Normal::new(0.0, self.unary_noise).expect("validated noise");
        let mut b0 = vec![0.0; g.dim()];
        for p in 0..g.pixels() {
            for l in 0..g.labels() {
                let hot = if y.get(p) == l { self.margin } else { 0.0 };
                b0[g.index(p, l)] = hot + noise.sample(&mut rng);
            }
        }
        let occluded = (self.occlusion_rate * g.pixels() as f64).round() as usize;
        for p in sample(&mut rng, g.pixels(), occluded) {
            b0[g.index(p, 0)..g.index(p, 0) + g.labels()].fill(0.0);
        }
        Ok((ScoreField::new(g, b0)?, y))
    }
}

/// Nearest-centre regions; every label owns at least one centre.
fn blob_labels<R: Rng>(g: &GridGraph, rng: &mut R) -> Vec<usize> {
    let centres: Vec<(f64, f64, usize)> = (0..g.labels() + 2)
        .map(|c| {
            let label = if c < g.labels() {
                c
            } else {
                rng.random_range(0..g.labels())
            };
            (
                rng.random_range(0.0..g.height() as f64),
                rng.random_range(0.0..g.width() as f64),
                label,
            )
        })
        .collect();
    (0..g.pixels())
        .map(|p| {
            let (r, c) = g.coords(p);
            let dist = |&(cr, cc, _): &(f64, f64, usize)| {
                (cr - r as f64).powi(2) + (cc - c as f64).powi(2)
            };
            centres
                .iter()
                .min_by(|a, b| dist(a).total_cmp(&dist(b)))
                .map(|t| t.2)
                .unwrap_or(0)
        })
        .collect()
}

/// Bands of random width along rows, columns or a diagonal.
fn stripe_labels<R: Rng>(g: &GridGraph, rng: &mut R) -> Vec<usize> {
    let orientation = rng.random_range(0..3);
    let span = g.height().max(g.width());
    let width = rng.random_range(2..=(span / 2).max(2));
    let offset = rng.random_range(0..g.labels());
    (0..g.pixels())
        .map(|p| {
            let (r, c) = g.coords(p);
            let t = match orientation {
                0 => r,
                1 => c,
                _ => r + c,
            };
            (t / width + offset) % g.labels()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    /// Independent weights on the label-coupled pattern.
    General,
    /// One pixel-level matrix shared by every label pair.
    Potts,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub parameterization: Parameterization,
    pub solver: SolverConfig,
    pub learn_bias: bool,
}

impl TrainConfig {
    pub fn new(parameterization: Parameterization) -> Self {
        Self {
            steps: 200,
            learning_rate: 100.0,
            lambda: 10.0,
            parameterization,
            solver: SolverConfig::new(Method::ConjugateGradient).with_tolerance(1e-10),
            learn_bias: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Label-coupled matrix for `General`, pixel matrix for `Potts`.
    pub pairwise: SparseSym,
    pub bias: Vec<f64>,
    /// Rows for steps `0..=steps`; row `k` is measured after `k` updates.
    pub history: Vec<HistoryRow>,
    pub scores: ScoreField,
}

impl TrainOutcome {
    pub fn final_row(&self) -> HistoryRow {
        *self.history.last().expect("history is never empty")
    }
}

struct Model<'a> {
    graph: GridGraph,
    cfg: &'a TrainConfig,
    pairwise: SparseSym,
    bias: Vec<f64>,
}

struct Evaluation {
    loss: f64,
    scores: ScoreField,
    pairwise_grad: SparseSym,
    bias_grad: Vec<f64>,
}

impl Model<'_> {
    fn unaries(&self, b0: &ScoreField) -> Result<ScoreField> {
        let l = self.graph.labels();
        let data = b0
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + self.bias[i % l])
            .collect();
        ScoreField::new(self.graph, data)
    }

    fn evaluate(&self, b0: &ScoreField, y: &LabelMap) -> Result<Evaluation> {
        let b = self.unaries(b0)?;
        let g = self.graph;
        let (scores, dl_db, pairwise_grad, loss) = match self.cfg.parameterization {
            Parameterization::General => {
                let sys = QuadraticSystem::new(self.pairwise.clone(), self.cfg.lambda)?;
                let x = ScoreField::new(g, sys.infer(b.data(), &self.cfg.solver)?.x)?;
                let (loss, dl_dx) = softmax_xent(&x, y)?;
                let dl_db = sys.grad_unary(dl_dx.data(), &self.cfg.solver)?.x;
                let grad = grad_pairwise(&dl_db, x.data(), &self.pairwise)?;
                (x, ScoreField::new(g, dl_db)?, grad, loss)
            }
            Parameterization::Potts => {
                let sys = PottsSystem::new(self.pairwise.clone(), g.labels(), self.cfg.lambda)?;
                let classes = sys.infer(&b.class_vectors(), &self.cfg.solver)?.classes;
                let x = ScoreField::from_class_vectors(g, &classes)?;
                let (loss, dl_dx) = softmax_xent(&x, y)?;
                let dl_db = sys
                    .grad_unary(&dl_dx.class_vectors(), &self.cfg.solver)?
                    .classes;
                let grad = sys.grad_pairwise(&dl_db, &classes)?;
                (x, ScoreField::from_class_vectors(g, &dl_db)?, grad, loss)
            }
        };
        let mut bias_grad = vec![0.0; g.labels()];
        for (i, v) in dl_db.data().iter().enumerate() {
            bias_grad[i % g.labels()] += v;
        }
        Ok(Evaluation {
            loss,
            scores,
            pairwise_grad,
            bias_grad,
        })
    }

    fn is_spd(&self, pairwise: &SparseSym) -> bool {
        let lambda = self.cfg.lambda;
        match self.cfg.parameterization {
            Parameterization::General => spd_probe(&pairwise.add_scaled_identity(lambda)).is_ok(),
            Parameterization::Potts => {
                let l = (self.graph.labels() - 1) as f64;
                spd_probe(&pairwise.scaled(l).add_scaled_identity(lambda)).is_ok()
                    && spd_probe(&pairwise.scaled(-1.0).add_scaled_identity(lambda)).is_ok()
            }
        }
    }

    /// Descends along the off-diagonal gradient, halving the step while the
    /// probe rejects the candidate. Keeps the old values after five halvings.
    fn update(&mut self, eval: &Evaluation, step: usize) {
        let mut lr = self.cfg.learning_rate;
        for attempt in 0..=5 {
            let mut candidate = self.pairwise.clone();
            for (v, (k, g)) in candidate
                .values_mut()
                .iter_mut()
                .zip(self.pairwise.iter().zip(eval.pairwise_grad.values()))
            {
                if k.0 != k.1 {
                    *v -= lr * g;
                }
            }
            if self.is_spd(&candidate) {
                self.pairwise = candidate;
                if self.cfg.learn_bias {
                    for (b, g) in self.bias.iter_mut().zip(&eval.bias_grad) {
                        *b -= lr * g;
                    }
                }
                return;
            }
            warn!(
                step,
                attempt, lr, "update rejected by SPD probe; halving step"
            );
            lr *= 0.5;
        }
        warn!(step, "no admissible step found; parameters unchanged");
    }
}

/// Gradient descent from zero pairwise weights on the task's own image.
pub fn train(task: &SyntheticTask, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (b0, y) = task.generate()?;
    let graph = task.graph;
    let pattern = match cfg.parameterization {
        Parameterization::General => SparseSym::build_pattern(&graph, true),
        Parameterization::Potts => SparseSym::build_pattern(&graph, false),
    };
    let mut model = Model {
        graph,
        cfg,
        pairwise: pattern.zeros_like(),
        bias: vec![0.0; graph.labels()],
    };

    let mut history = Vec::with_capacity(cfg.steps + 1);
    let mut step = 0;
    loop {
        let eval = model.evaluate(&b0, &y).map_err(|e| Error::SolverFailure {
            step,
            source: Box::new(e),
        })?;
        if !eval.loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        history.push(HistoryRow {
            step,
            loss: eval.loss,
            accuracy: evaluate(&eval.scores, &y)?.accuracy,
        });
        if step == cfg.steps {
            return Ok(TrainOutcome {
                pairwise: model.pairwise,
                bias: model.bias,
                history,
                scores: eval.scores,
            });
        }
        model.update(&eval, step);
        step += 1;
    }
}

/// Accuracy of the unary argmax on the task's own evidence.
pub fn baseline_accuracy(task: &SyntheticTask) -> Result<f64> {
    let (b0, y) = task.generate()?;
    Ok(evaluate(&b0, &y)?.accuracy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// `None` for classes absent from both prediction and truth.
    pub class_iou: Vec<Option<f64>>,
    pub mean_iou: f64,
}

pub fn evaluate(x: &ScoreField, y: &LabelMap) -> Result<Metrics> {
    let g = x.graph();
    check_len(g.pixels(), y.labels().len())?;
    check_len(g.labels(), y.graph().labels())?;
    let pred = argmax_labels(x);
    let l = g.labels();
    let mut inter = vec![0usize; l];
    let mut union = vec![0usize; l];
    let mut correct = 0;
    for (&p, &t) in pred.labels().iter().zip(y.labels()) {
        if p == t {
            correct += 1;
            inter[p] += 1;
            union[p] += 1;
        } else {
            union[p] += 1;
            union[t] += 1;
        }
    }
    let class_iou: Vec<Option<f64>> = inter
        .iter()
        .zip(&union)
        .map(|(&i, &u)| (u > 0).then(|| i as f64 / u as f64))
        .collect();
    let present: Vec<f64> = class_iou.iter().flatten().copied().collect();
    let mean_iou = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(Metrics {
        accuracy: correct as f64 / g.pixels() as f64,
        class_iou,
        mean_iou,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Stencil;

    fn task(seed: u64, noise: f64, occlusion: f64) -> SyntheticTask {
        let g = GridGraph::new(16, 16, 2, Stencil::Four).unwrap();
        SyntheticTask::new(seed, g, noise, occlusion).unwrap()
    }

    #[test]
    fn clean_task_decodes_exactly() {
        let (b0, y) = task(3, 0.0, 0.0).generate().unwrap();
        assert_eq!(argmax_labels(&b0), y);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = task(9, 0.5, 0.2).generate().unwrap();
        let b = task(9, 0.5, 0.2).generate().unwrap();
        assert_eq!(a, b);
        let c = task(10, 0.5, 0.2).generate().unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn occlusion_zeroes_the_requested_fraction() {
        let (b0, _) = task(1, 0.5, 0.25).generate().unwrap();
        let blank = (0..256)
            .filter(|&p| b0.pixel(p).iter().all(|&v| v == 0.0))
            .count();
        assert_eq!(blank, 64);
    }

    #[test]
    fn invalid_task_rejected() {
        let g = GridGraph::new(2, 2, 2, Stencil::Four).unwrap();
        assert!(SyntheticTask::new(0, g, 0.5, 1.0).is_err());
        assert!(SyntheticTask::new(0, g, -0.1, 0.0).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let g = GridGraph::new(2, 2, 2, Stencil::Four).unwrap();
        let y = LabelMap::new(g, vec![0, 0, 1, 1]).unwrap();
        let onehot = |labels: &[usize]| {
            let mut d = vec![0.0; 8];
            for (p, &l) in labels.iter().enumerate() {
                d[p * 2 + l] = 1.0;
            }
            ScoreField::new(g, d).unwrap()
        };
        let m = evaluate(&onehot(&[0, 0, 1, 1]), &y).unwrap();
        assert_eq!((m.accuracy, m.mean_iou), (1.0, 1.0));
        let m = evaluate(&onehot(&[1, 1, 0, 0]), &y).unwrap();
        assert_eq!(m.class_iou, vec![Some(0.0), Some(0.0)]);
        let m = evaluate(&onehot(&[0, 0, 0, 1]), &y).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert!((m.class_iou[0].unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.class_iou[1].unwrap() - 0.5).abs() < 1e-15);
        assert!((m.mean_iou - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn absent_class_excluded_from_mean() {
        let g = GridGraph::new(1, 2, 3, Stencil::Four).unwrap();
        let y = LabelMap::new(g, vec![0, 0]).unwrap();
        let x = ScoreField::new(g, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let m = evaluate(&x, &y).unwrap();
        assert_eq!(m.class_iou, vec![Some(1.0), None, None]);
        assert_eq!(m.mean_iou, 1.0);
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        for p in [Parameterization::General, Parameterization::Potts] {
            let mut cfg = TrainConfig::new(p);
            cfg.steps = 3;
            cfg.learning_rate = 0.0;
            let out = train(&task(2, 0.5, 0.2), &cfg).unwrap();
            assert_eq!(out.history.len(), 4);
            assert!(out.history.iter().all(|r| r.loss == out.history[0].loss));
        }
    }

    #[test]
    fn step_zero_is_scaled_unary_model() {
        let t = task(4, 0.5, 0.2);
        let (b0, y) = t.generate().unwrap();
        let scaled =
            ScoreField::new(t.graph, b0.data().iter().map(|v| v / 10.0).collect()).unwrap();
        let expect = softmax_xent(&scaled, &y).unwrap().0;
        let mut cfg = TrainConfig::new(Parameterization::General);
        cfg.steps = 1;
        let out = train(&t, &cfg).unwrap();
        assert!((out.history[0].loss - expect).abs() < 1e-9);
        assert_eq!(out.history[0].accuracy, baseline_accuracy(&t).unwrap());
    }
}
