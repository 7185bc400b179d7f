use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::mlp::{InputNorm, MlpModel};
use super::optim::{rmsprop_step, OptimizerState, RmsProp};
use crate::channel::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before the learning rate is halved.
    pub patience: usize,
    /// Training stops at the next plateau once the rate has been halved this often.
    pub max_halvings: usize,
    /// Fit per-feature standardization on the training inputs.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            rms_decay: 0.9,
            epsilon: 1e-8,
            batch_size: 1000,
            max_epochs: 100,
            patience: 3,
            max_halvings: 5,
            standardize: false,
            seed: rng::DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.rms_decay > 0.0 && self.rms_decay < 1.0) {
            return Err(Error::invalid("RMSprop decay must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid("batch size, epochs and patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean of the mini-batch losses seen during the epoch.
    pub train_mse: f64,
    pub valid_mse: f64,
    /// Rate used during this epoch.
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Parameters with the lowest validation MSE.
    pub model: MlpModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_mse: f64,
}

/// Feature matrix (one flattened gain vector per row) and label matrix.
pub fn dataset_arrays(data: &Dataset) -> Result<(Array2<f64>, Array2<f64>)> {
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let (n, d, k) = (data.len(), data.feature_dim(), data.num_users());
    let mut x = Array2::zeros((n, d));
    let mut y = Array2::zeros((n, k));
    for (i, (inst, label)) in data.instances.iter().zip(&data.labels).enumerate() {
        check_dim(d, inst.gains().len())?;
        check_dim(k, label.len())?;
        x.row_mut(i).assign(&ArrayView2::from_shape((1, d), inst.gains()).unwrap().row(0));
        y.row_mut(i).assign(&ArrayView2::from_shape((1, k), label.as_slice()).unwrap().row(0));
    }
    Ok((x, y))
}

pub fn train(
    model: MlpModel,
    train: (ArrayView2<'_, f64>, ArrayView2<'_, f64>),
    valid: (ArrayView2<'_, f64>, ArrayView2<'_, f64>),
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    train_with(model, train, valid, cfg, |_| {})
}

/// Mini-batch RMSprop with per-epoch seeded shuffling, halve-on-plateau
/// learning rate and best-validation snapshotting. `on_epoch` sees every record.
pub fn train_with(
    mut model: MlpModel,
    (tx, ty): (ArrayView2<'_, f64>, ArrayView2<'_, f64>),
    (vx, vy): (ArrayView2<'_, f64>, ArrayView2<'_, f64>),
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutput> {
    cfg.validate()?;
    if tx.nrows() == 0 || vx.nrows() == 0 {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    check_dim(tx.nrows(), ty.nrows())?;
    check_dim(vx.nrows(), vy.nrows())?;
    check_dim(model.input_dim(), tx.ncols())?;
    check_dim(model.input_dim(), vx.ncols())?;
    check_dim(model.output_dim(), ty.ncols())?;
    check_dim(model.output_dim(), vy.ncols())?;
    if cfg.standardize {
        model.input_norm = Some(InputNorm::fit(tx));
    }

    let mut opt = RmsProp { learning_rate: cfg.learning_rate, decay: cfg.rms_decay, epsilon: cfg.epsilon };
    let mut state = OptimizerState::new(&model);
    let mut order: Vec<usize> = (0..tx.nrows()).collect();
    let mut shuffle_rng = rng::substream(rng::derive(cfg.seed, 0x5348_5546), 0);

    let mut best = model.clone();
    let mut best_valid = super::mlp::mse_loss(model.predict(vx)?.view(), vy)?;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut halvings = 0;
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let bx = tx.select(Axis(0), chunk);
            let by = ty.select(Axis(0), chunk);
            let (grads, loss) = model.backward(bx.view(), by.view())?;
            rmsprop_step(&mut model, &grads, &mut state, &opt)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_mse = loss_sum / tx.nrows() as f64;
        let valid_mse = super::mlp::mse_loss(model.predict(vx)?.view(), vy)?;
        if !train_mse.is_finite() || !valid_mse.is_finite() || !model.is_finite() {
            return Err(Error::Numerical { iteration: epoch, what: "non-finite loss during training".into() });
        }
        let record = EpochRecord { epoch, train_mse, valid_mse, learning_rate: opt.learning_rate };
        on_epoch(&record);
        history.push(record);

        if valid_mse < best_valid {
            best_valid = valid_mse;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                if halvings == cfg.max_halvings {
                    break;
                }
                opt.learning_rate *= 0.5;
                halvings += 1;
                stale = 0;
            }
        }
    }
    Ok(TrainOutput { model: best, history, best_epoch, best_valid_mse: best_valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::{init_model, mse_loss, OutputActivation};
    use rand::Rng;

    fn linear_task(n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut r = rng::substream(seed, 0);
        let x = Array2::from_shape_simple_fn((n, 3), || r.random_range(0.0..1.0));
        let a = ndarray::array![[0.3, -0.2], [0.1, 0.4], [-0.25, 0.15]];
        let y = x.dot(&a) + 0.1;
        (x, y)
    }

    fn small_cfg(seed: u64) -> TrainConfig {
        TrainConfig { batch_size: 32, max_epochs: 60, seed, ..Default::default() }
    }

    #[test]
    fn fits_linear_map() {
        let (x, y) = linear_task(2000, 1);
        let (vx, vy) = linear_task(300, 2);
        let m = init_model(&[3, 200, 200, 200, 2], OutputActivation::Linear, 3).unwrap();
        let out = train(m, (x.view(), y.view()), (vx.view(), vy.view()), &small_cfg(4)).unwrap();
        assert!(out.best_valid_mse < 1e-3, "{}", out.best_valid_mse);
        let again = mse_loss(out.model.predict(vx.view()).unwrap().view(), vy.view()).unwrap();
        assert_eq!(again, out.best_valid_mse);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = linear_task(300, 5);
        let (vx, vy) = linear_task(50, 6);
        let run = || {
            let m = init_model(&[3, 16, 2], OutputActivation::Linear, 1).unwrap();
            let cfg = TrainConfig { max_epochs: 5, ..small_cfg(9) };
            train(m, (x.view(), y.view()), (vx.view(), vy.view()), &cfg).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn one_epoch_reduces_loss_for_most_seeds() {
        let (x, y) = linear_task(1000, 7);
        let (vx, vy) = linear_task(100, 8);
        let mut wins = 0;
        for seed in 0..5 {
            let m = init_model(&[3, 32, 32, 2], OutputActivation::Clamp { p_max: 1.0 }, seed).unwrap();
            let before = mse_loss(m.predict(x.view()).unwrap().view(), y.view()).unwrap();
            let cfg = TrainConfig { max_epochs: 1, ..small_cfg(seed) };
            let mut after = f64::NAN;
            let _ = train_with(m, (x.view(), y.view()), (vx.view(), vy.view()), &cfg, |r| after = r.train_mse);
            wins += usize::from(after < before);
        }
        assert!(wins >= 3, "{wins}/5");
    }

    #[test]
    fn lr_schedule_halves_then_stops() {
        // a constant target the zero-initialised output can never beat keeps validation flat
        let x = Array2::zeros((20, 2));
        let y = Array2::from_elem((20, 1), 0.5);
        let mut m = init_model(&[2, 4, 1], OutputActivation::Clamp { p_max: 1.0 }, 0).unwrap();
        m.layers[1].bias[0] = -1.0; // output clamped at 0, zero gradient everywhere
        let cfg = TrainConfig { max_epochs: 100, batch_size: 8, ..Default::default() };
        let out = train(m, (x.view(), y.view()), (x.view(), y.view()), &cfg).unwrap();
        // 3 stale epochs per halving, 5 halvings, then a final plateau
        assert_eq!(out.history.len(), 18);
        assert_eq!(out.history.last().unwrap().learning_rate, 1e-3 / 32.0);
        assert_eq!(out.best_epoch, 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = linear_task(10, 1);
        let m = init_model(&[3, 4, 2], OutputActivation::Linear, 0).unwrap();
        let empty = Array2::zeros((0, 3));
        let empty_y = Array2::zeros((0, 2));
        assert!(train(m.clone(), (empty.view(), empty_y.view()), (x.view(), y.view()), &small_cfg(0)).is_err());
        let bad = TrainConfig { rms_decay: 1.0, ..Default::default() };
        assert!(train(m.clone(), (x.view(), y.view()), (x.view(), y.view()), &bad).is_err());
        let wide = Array2::zeros((10, 4));
        assert!(train(m, (wide.view(), y.view()), (x.view(), y.view()), &small_cfg(0)).is_err());
    }
}
