//! Channel and dataset generation.
//!
//! Generators are pure functions of `(parameters, seed)`. Sample `i` is drawn
//! from the ChaCha stream `(seed, i)`, so output is identical regardless of
//! the size of the rayon pool.

mod dataset;
mod gd_toy;
mod geometry;

pub use dataset::{label_dataset, read_dataset, write_dataset, Dataset, DatasetMeta};
pub use gd_toy::{gd_run, gd_toy_dataset, GdSample, GdToyConfig};
pub use geometry::{generate_imac, hex_layout, Imac, ImacGeometry, Point};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{ChannelKind, ProblemInstance};
use crate::rng;

/// Noise power used by stats-matched regeneration.
pub const STATS_MATCHED_NOISE: f64 = 1e-3;

/// Gaussian interference channel: every `|h_kj|` is `|z|`, `z ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianIc {
    pub num_users: usize,
    pub noise_power: f64,
    pub p_max: f64,
}

impl GaussianIc {
    pub fn new(num_users: usize) -> Self {
        Self { num_users, noise_power: 1.0, p_max: 1.0 }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<ProblemInstance> {
        let k = self.num_users;
        let gains = (0..k * k).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
        ProblemInstance::ic(k, gains, self.noise_power, self.p_max)
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Vec<ProblemInstance>> {
        if self.num_users == 0 || n == 0 {
            return Err(Error::invalid("Gaussian IC needs K >= 1 and n >= 1"));
        }
        (0..n).into_par_iter().map(|i| self.sample(&mut rng::substream(seed, i as u64))).collect()
    }
}

/// `n` Gaussian IC instances with `K` users, unit noise and unit budget.
pub fn generate_gaussian_ic(num_users: usize, n: usize, seed: u64) -> Result<Vec<ProblemInstance>> {
    GaussianIc::new(num_users).generate(n, seed)
}

/// First and second moments of direct and interfering gains of a reference set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainStats {
    pub direct_mean: f64,
    pub direct_var: f64,
    pub cross_mean: f64,
    pub cross_var: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

impl GainStats {
    pub fn fit(reference: &[ProblemInstance]) -> Result<Self> {
        let first = reference.first().ok_or_else(|| Error::invalid("reference set is empty"))?;
        let k = first.num_users();
        let mut direct = Vec::with_capacity(reference.len() * k);
        let mut cross = Vec::with_capacity(reference.len() * k * k.saturating_sub(1));
        for inst in reference {
            if inst.num_users() != k {
                return Err(Error::invalid("reference instances must share K"));
            }
            for r in 0..k {
                for t in 0..k {
                    if r == t {
                        direct.push(inst.gain(r, t));
                    } else {
                        cross.push(inst.gain(r, t));
                    }
                }
            }
        }
        let (direct_mean, direct_var) = mean_var(&direct);
        let (cross_mean, cross_var) = if cross.is_empty() { (0.0, 0.0) } else { mean_var(&cross) };
        Ok(Self { direct_mean, direct_var, cross_mean, cross_var })
    }
}

/// Regenerates IC instances whose direct and interfering gains match the
/// first two moments of `reference`; negative draws are clamped to 0.
pub fn generate_from_stats(
    reference: &[ProblemInstance],
    n: usize,
    seed: u64,
    noise_power: f64,
) -> Result<Vec<ProblemInstance>> {
    let stats = GainStats::fit(reference)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let k = reference[0].num_users();
    let p_max = reference[0].p_max();
    let direct = Normal::new(stats.direct_mean, stats.direct_var.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let cross = Normal::new(stats.cross_mean, stats.cross_var.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(seed, i as u64);
            let gains = (0..k * k)
                .map(|idx| {
                    let g = if idx / k == idx % k { direct.sample(&mut rng) } else { cross.sample(&mut rng) };
                    g.max(0.0)
                })
                .collect();
            ProblemInstance::new(ChannelKind::Ic, k, gains, vec![noise_power; k], vec![1.0; k], p_max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_shapes_and_errors() {
        let one = generate_gaussian_ic(1, 1, 3).unwrap();
        assert_eq!(one[0].gains().len(), 1);
        assert!(one[0].gains()[0] >= 0.0);
        assert!(generate_gaussian_ic(0, 5, 1).is_err());
        assert!(generate_gaussian_ic(3, 0, 1).is_err());
    }

    #[test]
    fn gaussian_half_normal_moments() {
        // Independent oracle: half-normal moments from 1e5 |N(0,1)| draws.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
        let (oracle_mean, oracle_var) = mean_var(&draws);
        assert!((oracle_mean - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01);

        let insts = generate_gaussian_ic(10, 10_000, 5).unwrap();
        let all: Vec<f64> = insts.iter().flat_map(|i| i.gains().to_vec()).collect();
        let (mean, var) = mean_var(&all);
        assert!((mean - 0.7979).abs() < 0.01, "{mean}");
        assert!((mean - oracle_mean).abs() < 0.01);
        assert!((var - (1.0 - 2.0 / std::f64::consts::PI)).abs() < 0.01, "{var}");
        assert!((var - oracle_var).abs() < 0.01);
    }

    #[test]
    fn generation_is_deterministic_across_pool_sizes() {
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| generate_gaussian_ic(4, 64, 17).unwrap());
        let b = wide.install(|| generate_gaussian_ic(4, 64, 17).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, generate_gaussian_ic(4, 64, 18).unwrap());
    }

    #[test]
    fn stats_matched_constant_reference() {
        let c = 0.375;
        let reference = vec![ProblemInstance::ic(3, vec![c; 9], 1.0, 1.0).unwrap(); 4];
        let out = generate_from_stats(&reference, 20, 1, STATS_MATCHED_NOISE).unwrap();
        for inst in &out {
            assert!(inst.gains().iter().all(|g| *g == c));
            assert_eq!(inst.noise()[0], STATS_MATCHED_NOISE);
        }
        assert!(generate_from_stats(&[], 3, 1, 1e-3).is_err());
        let mixed = vec![
            ProblemInstance::ic(1, vec![1.0], 1.0, 1.0).unwrap(),
            ProblemInstance::ic(2, vec![1.0; 4], 1.0, 1.0).unwrap(),
        ];
        assert!(generate_from_stats(&mixed, 3, 1, 1e-3).is_err());
    }

    #[test]
    fn stats_matched_mean_within_standard_error() {
        let reference = generate_gaussian_ic(5, 5000, 8).unwrap();
        let stats = GainStats::fit(&reference).unwrap();
        let n = 20_000;
        let out = generate_from_stats(&reference, n, 9, STATS_MATCHED_NOISE).unwrap();
        let diag: Vec<f64> = out.iter().flat_map(|i| (0..5).map(move |k| i.gain(k, k))).collect();
        let (m, _) = mean_var(&diag);
        // clamping at 0 shifts the mean up by at most E[max(-X,0)] for X ~ N(m_d, s_d)
        let sd = stats.direct_var.sqrt();
        let z = stats.direct_mean / sd;
        let clamp_shift = sd * (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let target =
            stats.direct_mean + clamp_shift - stats.direct_mean * 0.5 * libm_erfc(z / std::f64::consts::SQRT_2);
        let se = 3.0 * sd / (diag.len() as f64).sqrt();
        assert!((m - target).abs() <= se + 1e-3, "mean {m} target {target} se {se}");
    }

    #[test]
    fn stats_matched_unclamped_mean() {
        // Reference far from zero so clamping never triggers.
        let reference: Vec<_> = generate_gaussian_ic(4, 2000, 4)
            .unwrap()
            .into_iter()
            .map(|i| {
                let g = i.gains().iter().map(|g| 5.0 + 0.5 * g).collect();
                ProblemInstance::ic(4, g, 1.0, 1.0).unwrap()
            })
            .collect();
        let stats = GainStats::fit(&reference).unwrap();
        let out = generate_from_stats(&reference, 5000, 2, STATS_MATCHED_NOISE).unwrap();
        let diag: Vec<f64> = out.iter().flat_map(|i| (0..4).map(move |k| i.gain(k, k))).collect();
        let (m, _) = mean_var(&diag);
        let bound = 3.0 * stats.direct_var.sqrt() / (diag.len() as f64).sqrt();
        assert!((m - stats.direct_mean).abs() <= bound, "{m} vs {}", stats.direct_mean);
    }

    // Abramowitz-Stegun 7.1.26, ample for a 1e-3 comparison.
    fn libm_erfc(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        let erf = 1.0 - poly * (-x * x).exp();
        if x >= 0.0 {
            1.0 - erf
        } else {
            1.0 + erf
        }
    }
}
