//! Shared fixtures for the criterion benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gt_core::measure::WeightedCloud;

/// side x side unit-pitch grid.
pub fn grid_cloud(side: usize) -> WeightedCloud {
    let mut pts = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            pts.push(vec![i as f64, j as f64]);
        }
    }
    WeightedCloud::uniform(pts).unwrap()
}

/// n uniform points in [0,1]^dim, deterministic under `seed`.
pub fn random_cloud(n: usize, dim: usize, seed: u64) -> WeightedCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    WeightedCloud::uniform(pts).unwrap()
}
