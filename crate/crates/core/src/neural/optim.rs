use ndarray::Zip;

use super::mlp::{Layer, MlpModel};
use crate::error::{check_dim, Result};

/// RMSprop hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        Self { learning_rate: 1e-3, decay: 0.9, epsilon: 1e-8 }
    }
}

/// Running average of squared gradients, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub running_sq_grad: Vec<Layer>,
}

impl OptimizerState {
    pub fn new(model: &MlpModel) -> Self {
        let running_sq_grad = model.layers.iter().map(|l| Layer::zeros(l.fan_in(), l.fan_out())).collect();
        Self { running_sq_grad }
    }
}

/// `r <- decay r + (1 - decay) g^2`, then `theta <- theta - lr g / sqrt(r + eps)`.
pub fn rmsprop_step(model: &mut MlpModel, grads: &[Layer], state: &mut OptimizerState, cfg: &RmsProp) -> Result<()> {
    check_dim(model.layers.len(), grads.len())?;
    check_dim(model.layers.len(), state.running_sq_grad.len())?;
    let (lr, rho, eps) = (cfg.learning_rate, cfg.decay, cfg.epsilon);
    for ((layer, g), r) in model.layers.iter_mut().zip(grads).zip(&mut state.running_sq_grad) {
        check_dim(layer.weights.len(), g.weights.len())?;
        check_dim(layer.bias.len(), g.bias.len())?;
        Zip::from(&mut layer.weights).and(&g.weights).and(&mut r.weights).for_each(|t, &g, r| {
            *r = rho * *r + (1.0 - rho) * g * g;
            *t -= lr * g / (*r + eps).sqrt();
        });
        Zip::from(&mut layer.bias).and(&g.bias).and(&mut r.bias).for_each(|t, &g, r| {
            *r = rho * *r + (1.0 - rho) * g * g;
            *t -= lr * g / (*r + eps).sqrt();
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::{init_model, OutputActivation};

    fn scalar_model(w: f64) -> MlpModel {
        let mut m = init_model(&[1, 1], OutputActivation::Linear, 0).unwrap();
        m.layers[0].weights[[0, 0]] = w;
        m
    }

    #[test]
    fn scalar_step_matches_hand_value() {
        let mut m = scalar_model(0.0);
        let mut st = OptimizerState::new(&m);
        let mut g = Layer::zeros(1, 1);
        g.weights[[0, 0]] = 1.0;
        rmsprop_step(&mut m, &[g], &mut st, &RmsProp::default()).unwrap();
        assert!((st.running_sq_grad[0].weights[[0, 0]] - 0.1).abs() < 1e-15);
        // -0.001 / sqrt(0.1 + 1e-8)
        assert!((m.layers[0].weights[[0, 0]] + 0.0031623).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_state() {
        let mut m = scalar_model(0.4);
        let mut st = OptimizerState::new(&m);
        st.running_sq_grad[0].weights[[0, 0]] = 1.0;
        let g = Layer::zeros(1, 1);
        for _ in 0..3 {
            rmsprop_step(&mut m, std::slice::from_ref(&g), &mut st, &RmsProp::default()).unwrap();
        }
        assert_eq!(m.layers[0].weights[[0, 0]], 0.4);
        assert!((st.running_sq_grad[0].weights[[0, 0]] - 0.729).abs() < 1e-12);
        assert!(st.running_sq_grad.iter().all(|l| l.weights.iter().all(|r| *r >= 0.0)));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut m = scalar_model(0.0);
        let mut st = OptimizerState::new(&m);
        assert!(rmsprop_step(&mut m, &[], &mut st, &RmsProp::default()).is_err());
        assert!(rmsprop_step(&mut m, &[Layer::zeros(2, 1)], &mut st, &RmsProp::default()).is_err());
    }
}
