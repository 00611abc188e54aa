//! Shared helpers for the criterion benchmarks.

use psvm::dataset::Dataset;
use psvm::simgen::{generate, ModelId, ModelSpec};

/// Standard benchmark input: one seeded draw from a named model.
pub fn bench_dataset(id: ModelId, n: usize, p: usize, seed: u64) -> Dataset {
    let spec = ModelSpec::new(id, n, p);
    generate(&spec, seed).expect("valid spec").0
}
