use crate::error::{check_len, Error, Result};
use crate::grid::GridGraph;

/// Real scores indexed by `(pixel, label)`, stored pixel-major:
/// `data[p * L + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    graph: GridGraph,
    data: Vec<f64>,
}

impl ScoreField {
    pub fn new(graph: GridGraph, data: Vec<f64>) -> Result<Self> {
        check_len(graph.dim(), data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "score field entry {i} is not finite"
            )));
        }
        Ok(Self { graph, data })
    }

    pub fn zeros(graph: GridGraph) -> Self {
        Self {
            graph,
            data: vec![0.0; graph.dim()],
        }
    }

    pub fn graph(&self) -> &GridGraph {
        &self.graph
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, pixel: usize, label: usize) -> f64 {
        self.data[self.graph.index(pixel, label)]
    }

    /// Scores of one pixel across labels.
    #[inline]
    pub fn pixel(&self, pixel: usize) -> &[f64] {
        let l = self.graph.labels();
        &self.data[pixel * l..(pixel + 1) * l]
    }

    /// Per-class vectors `x_1 .. x_L`, each of length `P`.
    pub fn class_vectors(&self) -> Vec<Vec<f64>> {
        let l = self.graph.labels();
        (0..l)
            .map(|k| self.data.iter().skip(k).step_by(l).copied().collect())
            .collect()
    }

    /// Inverse of [`ScoreField::class_vectors`].
    pub fn from_class_vectors(graph: GridGraph, classes: &[Vec<f64>]) -> Result<Self> {
        check_len(graph.labels(), classes.len())?;
        let p = graph.pixels();
        let mut data = vec![0.0; graph.dim()];
        for (k, class) in classes.iter().enumerate() {
            check_len(p, class.len())?;
            for (pix, &v) in class.iter().enumerate() {
                data[graph.index(pix, k)] = v;
            }
        }
        Self::new(graph, data)
    }
}
