//! Seeded random systems for tests, benchmarks and the CLI.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::grid::GridGraph;
use crate::potts::PottsSystem;
use crate::sparse::SparseSym;

/// Off-diagonal entries of `pattern` drawn uniformly from `[−amplitude, amplitude]`,
/// tied across the two triangles; the diagonal is zero.
pub fn random_pairwise<R: Rng + ?Sized>(
    pattern: &SparseSym,
    amplitude: f64,
    rng: &mut R,
) -> SparseSym {
    let mut out = pattern.zeros_like();
    let upper: Vec<(usize, usize)> = pattern
        .iter()
        .filter(|(i, j, _)| i < j)
        .map(|(i, j, _)| (i, j))
        .collect();
    for (i, j) in upper {
        let v = if amplitude > 0.0 {
            rng.random_range(-amplitude..=amplitude)
        } else {
            0.0
        };
        out.set_symmetric(i, j, v).expect("entry is in the pattern");
    }
    out
}

/// Standard-normal vector.
pub fn random_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Largest uniform amplitude for which `random_pairwise(pattern, ·) + λI` is
/// guaranteed diagonally dominant by a factor of `1 / margin`.
pub fn dominant_amplitude(pattern: &SparseSym, lambda: f64, margin: f64) -> f64 {
    let widest = (0..pattern.dim())
        .map(|i| pattern.row(i).0.iter().filter(|&&j| j != i).count())
        .max()
        .unwrap_or(0);
    if widest == 0 {
        lambda
    } else {
        margin * lambda / widest as f64
    }
}

/// A label-coupled system matrix `A + λI` whose off-label blocks share one
/// pixel matrix with entries uniform in `[−amplitude, amplitude]`, and a
/// standard-normal right-hand side.
pub fn potts_benchmark<R: Rng + ?Sized>(
    graph: &GridGraph,
    amplitude: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<(SparseSym, Vec<f64>)> {
    let shared = random_pairwise(&SparseSym::build_pattern(graph, false), amplitude, rng);
    let system = PottsSystem::new(shared, graph.labels(), lambda)?
        .expand_general()
        .add_scaled_identity(lambda);
    let b = random_vector(graph.dim(), rng);
    Ok((system, b))
}
