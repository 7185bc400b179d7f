//! Gradient-descent toy problem: `min_x (x^2 - z)^2 / 4`, iterated as
//! `x <- x - 2 a x (x^2 - z)`. The learned map is `(x0, z) -> x_T`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdToyConfig {
    pub iterations: usize,
    pub step: f64,
    /// `x0 ~ Uniform(-x0_range, x0_range)`.
    pub x0_range: f64,
    /// `z ~ Uniform(z_lo, z_hi)`.
    pub z_lo: f64,
    pub z_hi: f64,
    /// Iterates with `|x|` above this are treated as divergent.
    pub overflow_guard: f64,
}

impl Default for GdToyConfig {
    fn default() -> Self {
        Self { iterations: 3000, step: 0.01, x0_range: 2.0, z_lo: -2.0, z_hi: 2.0, overflow_guard: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdSample {
    pub x0: f64,
    pub z: f64,
    pub xt: f64,
}

/// Runs the recursion; `None` if an iterate leaves `[-guard, guard]`.
pub fn gd_run(x0: f64, z: f64, iterations: usize, step: f64, guard: f64) -> Option<f64> {
    let mut x = x0;
    for _ in 0..iterations {
        x -= 2.0 * step * x * (x * x - z);
        if !(x.abs() <= guard) {
            return None;
        }
    }
    Some(x)
}

const MAX_REDRAWS: usize = 1000;

impl GdToyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("T must be at least 1"));
        }
        if !(self.step > 0.0) {
            return Err(Error::invalid("step size must be positive"));
        }
        if !(self.z_lo <= self.z_hi && self.x0_range > 0.0) {
            return Err(Error::invalid("empty sampling range"));
        }
        Ok(())
    }

    /// Draws `(x0, z)` and runs the recursion, redrawing divergent samples.
    pub fn sample(&self, rng: &mut impl Rng) -> Result<GdSample> {
        for _ in 0..MAX_REDRAWS {
            let x0 = rng.random_range(-self.x0_range..=self.x0_range);
            let z = rng.random_range(self.z_lo..=self.z_hi);
            if let Some(xt) = gd_run(x0, z, self.iterations, self.step, self.overflow_guard) {
                return Ok(GdSample { x0, z, xt });
            }
        }
        Err(Error::Numerical {
            iteration: self.iterations,
            what: format!("{MAX_REDRAWS} consecutive divergent draws; step size too large"),
        })
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Vec<GdSample>> {
        self.validate()?;
        (0..n).into_par_iter().map(|i| self.sample(&mut rng::substream(seed, i as u64))).collect()
    }
}

/// `n` samples with the default sampling ranges.
pub fn gd_toy_dataset(n: usize, iterations: usize, step: f64, seed: u64) -> Result<Vec<GdSample>> {
    GdToyConfig { iterations, step, ..Default::default() }.generate(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_z_drives_iterate_to_zero() {
        for x0 in [-0.9, -0.3, 0.2, 0.8] {
            let xt = gd_run(x0, -1.0, 3000, 0.01, 1e6).unwrap();
            assert!(xt.abs() < 1e-6, "{xt}");
        }
    }

    #[test]
    fn positive_z_converges_to_root() {
        // oracle: the recursion itself, written out independently
        let mut x = 0.5f64;
        for _ in 0..3000 {
            x = x - 2.0 * 0.01 * x * (x * x - 1.0);
        }
        let xt = gd_run(0.5, 1.0, 3000, 0.01, 1e6).unwrap();
        assert_eq!(xt, x);
        assert!((xt - 1.0).abs() < 1e-3);
    }

    #[test]
    fn divergence_is_flagged_and_redrawn() {
        assert!(gd_run(2.0, 2.0, 50, 1.0, 1e6).is_none());
        let cfg = GdToyConfig { iterations: 50, step: 0.3, ..Default::default() };
        // large steps diverge for some draws; every returned sample is finite
        for s in cfg.generate(200, 4).unwrap() {
            assert!(s.xt.abs() <= cfg.overflow_guard);
        }
        let hopeless = GdToyConfig { iterations: 50, step: 1e3, ..Default::default() };
        assert!(hopeless.generate(1, 0).is_err());
    }

    #[test]
    fn dataset_defaults_and_errors() {
        let data = gd_toy_dataset(100, 3000, 0.01, 1).unwrap();
        assert_eq!(data.len(), 100);
        for s in &data {
            assert!((-2.0..=2.0).contains(&s.x0) && (-2.0..=2.0).contains(&s.z));
            if s.z < -0.5 {
                assert!(s.xt.abs() < 1e-3);
            }
        }
        assert!(gd_toy_dataset(1, 0, 0.01, 1).is_err());
        assert!(gd_toy_dataset(1, 10, 0.0, 1).is_err());
    }
}
