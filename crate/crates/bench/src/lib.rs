//! Shared fixtures for the benchmarks.

use gcrf_core::synth::{random_pairwise, random_vector};
use gcrf_core::{GridGraph, PottsSystem, ScoreField, SparseSym, Stencil};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A shared-pairwise system on a 4-connected grid with unaries drawn from a
/// standard normal.
pub fn potts_fixture(
    height: usize,
    width: usize,
    labels: usize,
    amplitude: f64,
    lambda: f64,
) -> (PottsSystem, ScoreField) {
    let graph = GridGraph::new(height, width, labels, Stencil::Four).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let shared = random_pairwise(
        &SparseSym::build_pattern(&graph, false),
        amplitude,
        &mut rng,
    );
    let system = PottsSystem::new(shared, labels, lambda).expect("valid system");
    let unary =
        ScoreField::new(graph, random_vector(graph.dim(), &mut rng)).expect("finite unaries");
    (system, unary)
}
