//! Shared fixtures for the benchmarks.

use ndarray::Array2;
use wmmse_learn::channel::generate_gaussian_ic;
use wmmse_learn::neural::{default_layer_sizes, init_model, MlpModel, OutputActivation};
use wmmse_learn::ProblemInstance;

pub const SEED: u64 = 2024;

pub fn ic_instances(k: usize, n: usize) -> Vec<ProblemInstance> {
    generate_gaussian_ic(k, n, SEED).expect("valid scenario")
}

/// Untrained default-architecture model for `K` users.
pub fn model(k: usize) -> MlpModel {
    init_model(&default_layer_sizes(k * k, k), OutputActivation::Clamp { p_max: 1.0 }, SEED).expect("valid sizes")
}

/// One flattened gain vector per row.
pub fn features(instances: &[ProblemInstance]) -> Array2<f64> {
    let d = instances[0].feature_dim();
    Array2::from_shape_fn((instances.len(), d), |(i, j)| instances[i].gains()[j])
}
