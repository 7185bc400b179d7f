//! Fully connected ReLU network trained with RMSprop on WMMSE labels.

mod checkpoint;
mod infer32;
mod mlp;
mod optim;
mod train;

pub use checkpoint::{load_model, read_model, save_model, write_history, write_model};
pub use infer32::MlpF32;
pub use mlp::{
    binarize, init_model, mse_loss, truncated_normal, InputNorm, Layer, MlpModel, OutputActivation, DEFAULT_HIDDEN,
};
pub use optim::{rmsprop_step, OptimizerState, RmsProp};
pub use train::{dataset_arrays, train, train_with, EpochRecord, TrainConfig, TrainOutput};

/// `[input_dim, 200, 200, 200, output_dim]`.
pub fn default_layer_sizes(input_dim: usize, output_dim: usize) -> Vec<usize> {
    let mut sizes = vec![input_dim];
    sizes.extend(DEFAULT_HIDDEN);
    sizes.push(output_dim);
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn backprop_matches_central_differences() {
        let sizes = [5, 7, 6, 3];
        let mut model = init_model(&sizes, OutputActivation::Clamp { p_max: 1.0 }, 11).unwrap();
        for l in &mut model.layers {
            l.bias.mapv_inplace(|_| 0.05);
        }
        let mut r = rng::substream(12, 0);
        let x = Array2::from_shape_simple_fn((8, 5), || r.random_range(0.0..1.0));
        let y = Array2::from_shape_simple_fn((8, 3), || r.random_range(0.0..1.0));
        let (grads, _) = model.backward(x.view(), y.view()).unwrap();
        let loss = |m: &MlpModel| mse_loss(m.predict(x.view()).unwrap().view(), y.view()).unwrap();

        let h = 1e-6;
        let mut checked = 0;
        while checked < 20 {
            let l = r.random_range(0..model.layers.len());
            let use_bias = r.random_bool(0.25);
            let (i, j) = (r.random_range(0..sizes[l]), r.random_range(0..sizes[l + 1]));
            let (analytic, mut plus, mut minus) =
                (if use_bias { grads[l].bias[j] } else { grads[l].weights[[i, j]] }, model.clone(), model.clone());
            let poke = |m: &mut MlpModel, d: f64| {
                if use_bias {
                    m.layers[l].bias[j] += d
                } else {
                    m.layers[l].weights[[i, j]] += d
                }
            };
            poke(&mut plus, h);
            poke(&mut minus, -h);
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            if numeric.abs() < 1e-7 && analytic.abs() < 1e-7 {
                continue; // dead unit, nothing to compare
            }
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
            assert!(rel <= 1e-4, "layer {l} ({i},{j}) bias={use_bias}: {analytic} vs {numeric}");
            checked += 1;
        }
    }

    #[test]
    fn default_sizes() {
        assert_eq!(default_layer_sizes(100, 10), vec![100, 200, 200, 200, 10]);
    }

    #[test]
    fn binarize_is_idempotent() {
        let mut r = rng::substream(1, 0);
        for _ in 0..100 {
            let y: Vec<f64> = (0..10).map(|_| r.random_range(0.0..=2.0)).collect();
            let once = binarize(&y, 2.0);
            assert_eq!(binarize(&once, 2.0), once);
        }
    }
}
