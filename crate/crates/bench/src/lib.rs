//! Shared fixtures for the criterion benchmarks.

use ctrboost::data::Dataset;
use ctrboost::gbdt::GbdtConfig;
use ctrboost::synth::SynthSpec;

/// CTR-like data with `n_categorical` high-cardinality columns.
pub fn ctr_dataset(n_rows: usize, n_categorical: usize) -> Dataset {
    SynthSpec::CtrClone {
        n_rows,
        n_categorical,
        seed: 17,
    }
    .generate()
}

/// A fixed-size ensemble without early stopping, so timings compare like with like.
pub fn bench_config(n_trees: usize) -> GbdtConfig {
    GbdtConfig {
        n_trees,
        max_depth: 6,
        early_stopping_rounds: 0,
        ..GbdtConfig::default()
    }
}
