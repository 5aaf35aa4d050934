//! Shared inputs for the criterion benchmarks.

use locsparse::generators::Family;
use locsparse::harness::learn_weights;
use locsparse::{FractionalSolution, StochasticInstance, WeightSource, WeightedItem};

pub const SEED: u64 = 0x5eed;

/// A benchmark instance with Monte Carlo weights learned from 50 runs.
pub fn weighted_instance(family: Family, n: usize) -> (StochasticInstance, FractionalSolution) {
    let instance = family.generate(n).expect("benchmark family");
    let x = learn_weights(&instance, &WeightSource::MonteCarlo, 50, SEED).expect("weights");
    (instance, x)
}

/// Deterministic skewed weights: item `i` gets `1 / (i + 1)`.
pub fn harmonic_items(len: usize) -> Vec<WeightedItem> {
    (0..len)
        .map(|i| WeightedItem::new(i as u64, 1.0 / (i + 1) as f64))
        .collect()
}
