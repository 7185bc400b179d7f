use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::rng;

/// Default hidden architecture: three layers of 200 ReLUs.
pub const DEFAULT_HIDDEN: [usize; 3] = [200, 200, 200];

/// Truncation bound of the weight initializer.
pub const INIT_TRUNCATION: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation {
    /// `min(max(z, 0), p_max)`.
    Clamp { p_max: f64 },
    /// Identity; used for regression targets outside a power box.
    Linear,
}

impl OutputActivation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Clamp { p_max } => z.max(0.0).min(p_max),
            OutputActivation::Linear => z,
        }
    }

    /// Derivative with subgradient 0 at both clamp boundaries.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputActivation::Clamp { p_max } => {
                if z > 0.0 && z < p_max {
                    1.0
                } else {
                    0.0
                }
            }
            OutputActivation::Linear => 1.0,
        }
    }
}

/// One dense layer; `weights` is `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weights: Array2::zeros((fan_in, fan_out)), bias: Array1::zeros(fan_out) }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// Per-feature affine map `x -> (x - mean) * inv_std` applied before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Array1<f64>,
    pub inv_std: Array1<f64>,
}

impl InputNorm {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty input");
        let inv_std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { 1.0 / s } else { 1.0 });
        Self { mean, inv_std }
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean) * &self.inv_std
    }
}

/// Fully connected ReLU network with a clamped (or linear) output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub output: OutputActivation,
    pub input_norm: Option<InputNorm>,
}

/// Draw from N(0, 1) conditioned on `|z| <= 2`, by rejection.
pub fn truncated_normal(rng: &mut impl Rng) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= INIT_TRUNCATION {
            return z;
        }
    }
}

/// Truncated-normal weights scaled by `1/sqrt(fan_in)`, zero biases.
pub fn init_model(layer_sizes: &[usize], output: OutputActivation, seed: u64) -> Result<MlpModel> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::invalid(format!("invalid layer sizes {layer_sizes:?}")));
    }
    if let OutputActivation::Clamp { p_max } = output {
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::invalid("output clamp bound must be positive"));
        }
    }
    let mut rng = rng::substream(seed, 0);
    let layers = layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || truncated_normal(&mut rng) * scale);
            Layer { weights, bias: Array1::zeros(fan_out) }
        })
        .collect();
    Ok(MlpModel { layers, output, input_norm: None })
}

/// Activations cached by a batch forward pass.
pub(crate) struct Trace {
    /// `inputs[l]` feeds layer `l`; `inputs[0]` is the (normalized) batch.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Array2<f64>>,
    pub(crate) output: Array2<f64>,
}

impl MlpModel {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(Layer::fan_out));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    /// Output clamp bound, `None` for a linear output layer.
    pub fn p_max(&self) -> Option<f64> {
        match self.output {
            OutputActivation::Clamp { p_max } => Some(p_max),
            OutputActivation::Linear => None,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        Ok(self.predict(batch)?.into_raw_vec_and_offset().0)
    }

    /// Batch forward pass, one sample per row.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), x.ncols())?;
        let normed = self.input_norm.as_ref().map(|n| n.apply(x));
        let input = normed.as_ref().map_or(x, |n| n.view());
        let last = self.layers.len() - 1;
        let mut a: Option<Array2<f64>> = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = match &a {
                Some(prev) => prev.dot(&layer.weights),
                None => input.dot(&layer.weights),
            };
            let act = self.output;
            for mut row in z.rows_mut() {
                if l == last {
                    row.zip_mut_with(&layer.bias, |v, b| *v = act.apply(*v + b));
                } else {
                    row.zip_mut_with(&layer.bias, |v, b| *v = (*v + b).max(0.0));
                }
            }
            a = Some(z);
        }
        Ok(a.expect("at least one layer"))
    }

    pub(crate) fn forward_trace(&self, x: ArrayView2<'_, f64>) -> Trace {
        let a0 = match &self.input_norm {
            Some(norm) => norm.apply(x),
            None => x.to_owned(),
        };
        let mut inputs = vec![a0];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        let mut output = Array2::zeros((0, 0));
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = inputs[l].dot(&layer.weights);
            z += &layer.bias;
            let a = if l == last {
                let act = self.output;
                z.mapv(|v| act.apply(v))
            } else {
                z.mapv(|v| v.max(0.0))
            };
            pre.push(z);
            if l == last {
                output = a;
            } else {
                inputs.push(a);
            }
        }
        Trace { inputs, pre, output }
    }

    /// Gradients of [`mse_loss`] over the batch with respect to every weight
    /// and bias, plus the loss itself. ReLU and clamp kinks get subgradient 0.
    pub fn backward(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<(Vec<Layer>, f64)> {
        check_dim(self.input_dim(), x.ncols())?;
        check_dim(self.output_dim(), y.ncols())?;
        check_dim(x.nrows(), y.nrows())?;
        if x.nrows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let trace = self.forward_trace(x);
        let loss = mse_loss(trace.output.view(), y)?;
        let scale = 2.0 / (y.len() as f64);

        let last = self.layers.len() - 1;
        let act = self.output;
        let mut delta = Array2::zeros(trace.output.raw_dim());
        Zip::from(&mut delta)
            .and(&trace.output)
            .and(y)
            .and(&trace.pre[last])
            .for_each(|d, &p, &t, &z| *d = scale * (p - t) * act.derivative(z));

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let gw = trace.inputs[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Layer { weights: gw, bias: gb });
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                Zip::from(&mut back).and(&trace.pre[l - 1]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        Ok((grads, loss))
    }
}

/// Mean over batch and output coordinates of `(pred - label)^2`.
pub fn mse_loss(pred: ArrayView2<'_, f64>, label: ArrayView2<'_, f64>) -> Result<f64> {
    check_dim(label.nrows(), pred.nrows())?;
    check_dim(label.ncols(), pred.ncols())?;
    if pred.is_empty() {
        return Err(Error::invalid("empty prediction"));
    }
    let mut acc = 0.0;
    Zip::from(pred).and(label).for_each(|&p, &t| acc += (p - t) * (p - t));
    Ok(acc / pred.len() as f64)
}

/// Rounds each output to `p_max` when strictly above `p_max / 2`, else to 0.
pub fn binarize(pred: &[f64], p_max: f64) -> Vec<f64> {
    pred.iter().map(|&y| if y > 0.5 * p_max { p_max } else { 0.0 }).collect()
}
