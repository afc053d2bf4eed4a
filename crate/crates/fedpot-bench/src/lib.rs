//! Shared fixtures for the criterion benches.

use fedpot_core::dataset::{generate_synthetic, SyntheticSpec};
use fedpot_core::LabeledDataset;

/// Deterministic synthetic dataset sized for micro-benchmarks.
pub fn bench_dataset(dimension: usize, num_classes: usize, per_class: usize) -> LabeledDataset {
    generate_synthetic(&SyntheticSpec {
        dimension,
        num_classes,
        samples_per_class: per_class,
        cluster_spread: 0.1,
        seed: 42,
    })
    .expect("bench dataset")
}
