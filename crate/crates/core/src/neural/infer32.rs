//! Single-precision copy of a trained model for fast batch inference.
//! Training always runs in f64.

use ndarray::{Array1, Array2, ArrayView2};

use super::mlp::{MlpModel, OutputActivation};
use crate::error::{check_dim, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpF32 {
    /// `(weights fan_in x fan_out, bias)` per layer; input normalization is
    /// folded into the first layer.
    pub layers: Vec<(Array2<f32>, Array1<f32>)>,
    pub output: OutputActivation,
}

impl MlpModel {
    pub fn to_f32(&self) -> MlpF32 {
        let mut layers: Vec<(Array2<f64>, Array1<f64>)> =
            self.layers.iter().map(|l| (l.weights.clone(), l.bias.clone())).collect();
        if let Some(norm) = &self.input_norm {
            // ((x - m) * s) W + b = x (diag(s) W) + (b - (m * s) W)
            let (w, b) = &mut layers[0];
            let shift = (&norm.mean * &norm.inv_std).dot(&*w);
            *b -= &shift;
            for (mut row, s) in w.rows_mut().into_iter().zip(&norm.inv_std) {
                row *= *s;
            }
        }
        MlpF32 {
            layers: layers.into_iter().map(|(w, b)| (w.mapv(|v| v as f32), b.mapv(|v| v as f32))).collect(),
            output: self.output,
        }
    }
}

impl MlpF32 {
    pub fn input_dim(&self) -> usize {
        self.layers[0].0.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().0.ncols()
    }

    pub fn predict(&self, x: ArrayView2<'_, f32>) -> Result<Array2<f32>> {
        check_dim(self.input_dim(), x.ncols())?;
        let last = self.layers.len() - 1;
        let (lo, hi) = match self.output {
            OutputActivation::Clamp { p_max } => (0.0, p_max as f32),
            OutputActivation::Linear => (f32::NEG_INFINITY, f32::INFINITY),
        };
        let mut a: Option<Array2<f32>> = None;
        for (l, (w, b)) in self.layers.iter().enumerate() {
            let mut z = match &a {
                Some(prev) => prev.dot(w),
                None => x.dot(w),
            };
            for mut row in z.rows_mut() {
                if l == last {
                    row.zip_mut_with(b, |v, b| *v = (*v + b).max(lo).min(hi));
                } else {
                    row.zip_mut_with(b, |v, b| *v = (*v + b).max(0.0));
                }
            }
            a = Some(z);
        }
        Ok(a.expect("at least one layer"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_model, InputNorm};
    use crate::rng;
    use rand::Rng;

    #[test]
    fn matches_f64_model() {
        let mut r = rng::substream(5, 0);
        let x = Array2::from_shape_simple_fn((50, 12), || r.random_range(0.0..3.0));
        for output in [OutputActivation::Clamp { p_max: 1.0 }, OutputActivation::Linear] {
            let mut m = init_model(&[12, 16, 16, 4], output, 2).unwrap();
            m.layers[2].bias.fill(0.4);
            m.input_norm = Some(InputNorm::fit(x.view()));
            let exact = m.predict(x.view()).unwrap();
            let fast = m.to_f32().predict(x.mapv(|v| v as f32).view()).unwrap();
            let err = (&exact - &fast.mapv(f64::from)).mapv(f64::abs).fold(0.0, |a: f64, b| a.max(*b));
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn dims_are_checked() {
        let m = init_model(&[3, 4, 2], OutputActivation::Linear, 1).unwrap().to_f32();
        assert_eq!((m.input_dim(), m.output_dim()), (3, 2));
        assert!(m.predict(Array2::zeros((1, 4)).view()).is_err());
    }
}
