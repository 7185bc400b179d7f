//! Experiment harness: sum-rate comparisons between the learned policy and the
//! WMMSE, random and max-power baselines, empirical CDFs, histograms, timing
//! and generalization tests.

mod gd_demo;
mod report;
mod timing;

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{Dataset, Imac};
use crate::error::{check_dim, Error, Result};
use crate::instance::{ChannelKind, ProblemInstance};
use crate::neural::{binarize, MlpModel};
use crate::rng;
use crate::wmmse::{allocate_max_power, allocate_random, sum_rate, wmmse, Init, WmmseConfig};

pub use gd_demo::{gd_demo, GdDemoConfig, GdDemoReport};
pub use report::{
    write_cdf_csv, write_histogram_csv, write_report_csv, write_report_json, write_reports, write_timing_csv,
};
pub use timing::{bench_timing, BenchOptions, Precision, TimingTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Dnn,
    Wmmse,
    Random,
    MaxPower,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Dnn, Policy::Wmmse, Policy::Random, Policy::MaxPower];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Dnn => "dnn",
            Policy::Wmmse => "wmmse",
            Policy::Random => "random",
            Policy::MaxPower => "max_power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyResult {
    pub policy: Policy,
    pub avg_rate: f64,
    /// `100 * avg_rate / avg_rate(wmmse)`.
    pub ratio_pct: f64,
    /// Wall-clock seconds spent computing this policy's allocations.
    pub total_time_s: f64,
    /// Per-sample sum-rates in bit/s/Hz, in test-set order.
    #[serde(skip)]
    pub rates: Vec<f64>,
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` increasing bin edges shared by all policies.
    pub edges: Vec<f64>,
    pub counts: BTreeMap<Policy, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub policies: Vec<PolicyResult>,
    /// `100 * avg(dnn) / avg(wmmse)`.
    pub dnn_over_wmmse_ratio: f64,
    pub histogram: Histogram,
    pub metadata: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn policy(&self, p: Policy) -> &PolicyResult {
        self.policies.iter().find(|r| r.policy == p).expect("every report holds all policies")
    }

    pub fn average(&self, p: Policy) -> f64 {
        self.policy(p).avg_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Threshold DNN outputs to `{0, p_max}`.
    pub binarize: bool,
    /// Seed of the random-power baseline.
    pub seed: u64,
    /// Baseline WMMSE settings; `None` uses the dataset's labeling settings.
    pub wmmse: Option<WmmseConfig>,
    pub hist_bins: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { binarize: false, seed: rng::DEFAULT_SEED, wmmse: None, hist_bins: 50 }
    }
}

/// Empirical CDF: one `(rate, P[R <= rate])` point per distinct rate.
pub fn empirical_cdf(rates: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, r) in sorted.into_iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 = p,
            _ => out.push((r, p)),
        }
    }
    out
}

/// Equal-width histogram over `[0, max rate]` (the upper edge is inclusive).
pub fn histogram(series: &[(Policy, &[f64])], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let top = series.iter().flat_map(|(_, r)| r.iter().copied()).fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    let width = top / bins as f64;
    let edges = (0..=bins).map(|i| if i == bins { top } else { i as f64 * width }).collect();
    let counts = series
        .iter()
        .map(|(p, rates)| {
            let mut c = vec![0; bins];
            for r in rates.iter() {
                c[((r / width) as usize).min(bins - 1)] += 1;
            }
            (*p, c)
        })
        .collect();
    Histogram { edges, counts }
}

fn features(instances: &[ProblemInstance], dim: usize) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((instances.len(), dim));
    for (mut row, inst) in x.rows_mut().into_iter().zip(instances) {
        check_dim(dim, inst.gains().len())?;
        row.iter_mut().zip(inst.gains()).for_each(|(a, b)| *a = *b);
    }
    Ok(x)
}

/// DNN powers for `instances`, read from the first `K` model outputs, clipped
/// into `[0, p_max]` and optionally binarized. Returns the powers and the
/// wall-clock time of the forward pass.
fn dnn_powers(
    model: &MlpModel,
    inputs: &[ProblemInstance],
    targets: &[ProblemInstance],
    bin: bool,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let x = features(inputs, model.input_dim())?;
    let start = Instant::now();
    let pred = model.predict(x.view())?;
    let elapsed = start.elapsed().as_secs_f64();
    let powers = pred
        .rows()
        .into_iter()
        .zip(targets)
        .map(|(row, inst)| {
            let p_max = inst.p_max();
            let p: Vec<f64> = row.iter().take(inst.num_users()).map(|v| v.clamp(0.0, p_max)).collect();
            if bin {
                binarize(&p, p_max)
            } else {
                p
            }
        })
        .collect();
    Ok((powers, elapsed))
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn rates_of(instances: &[ProblemInstance], powers: &[Vec<f64>]) -> Result<Vec<f64>> {
    instances.par_iter().zip(powers).map(|(inst, p)| sum_rate(inst, p)).collect()
}

/// Scores precomputed DNN powers against the three baselines on `instances`.
fn assemble(
    instances: &[ProblemInstance],
    dnn: (Vec<Vec<f64>>, f64),
    opts: &EvalOptions,
    wmmse_cfg: &WmmseConfig,
    mut metadata: BTreeMap<String, String>,
) -> Result<EvalReport> {
    if instances.is_empty() {
        return Err(Error::invalid("test set has no samples"));
    }
    let (wmmse_p, t_wmmse) = timed(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(index, inst)| {
                wmmse(inst, wmmse_cfg)
                    .map(|o| o.allocation.into_vec())
                    .map_err(|e| Error::Sample { index, source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let random_seed = rng::derive(opts.seed, 0x5241_4e44);
    let (random_p, t_random) = timed(|| {
        Ok(instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| allocate_random(inst, rng::derive(random_seed, i as u64)).into_vec())
            .collect::<Vec<_>>())
    })?;
    let (max_p, t_max) = timed(|| Ok(instances.iter().map(|i| allocate_max_power(i).into_vec()).collect::<Vec<_>>()))?;

    let mut results = Vec::with_capacity(4);
    for (policy, powers, t) in [
        (Policy::Dnn, &dnn.0, dnn.1),
        (Policy::Wmmse, &wmmse_p, t_wmmse),
        (Policy::Random, &random_p, t_random),
        (Policy::MaxPower, &max_p, t_max),
    ] {
        let rates = rates_of(instances, powers)?;
        let avg_rate = rates.iter().sum::<f64>() / rates.len() as f64;
        results.push(PolicyResult {
            policy,
            avg_rate,
            ratio_pct: 0.0,
            total_time_s: t,
            cdf: empirical_cdf(&rates),
            rates,
        });
    }
    let reference = results[1].avg_rate;
    if !(reference > 0.0) {
        return Err(Error::Domain("WMMSE average sum-rate is zero; ratio undefined".into()));
    }
    for r in &mut results {
        r.ratio_pct = 100.0 * r.avg_rate / reference;
    }
    let series: Vec<(Policy, &[f64])> = results.iter().map(|r| (r.policy, r.rates.as_slice())).collect();
    let histogram = histogram(&series, opts.hist_bins);
    metadata.insert("binarize".into(), opts.binarize.to_string());
    metadata.insert("random_seed".into(), opts.seed.to_string());
    metadata.insert("wmmse_obj_tol".into(), format!("{:e}", wmmse_cfg.obj_tol));
    metadata.insert("wmmse_max_iter".into(), wmmse_cfg.max_iter.to_string());
    Ok(EvalReport {
        n_samples: instances.len(),
        dnn_over_wmmse_ratio: results[0].ratio_pct,
        policies: results,
        histogram,
        metadata,
    })
}

fn default_wmmse(obj_tol: f64, max_iter: usize) -> WmmseConfig {
    WmmseConfig { obj_tol, max_iter, init: Init::FullPower }
}

fn check_model(model: &MlpModel, input_dim: usize, num_users: usize) -> Result<()> {
    check_dim(input_dim, model.input_dim())?;
    check_dim(num_users, model.output_dim())
}

/// Evaluates `model` on instances it was built for (same input layout and K).
pub fn evaluate_instances(
    instances: &[ProblemInstance],
    model: &MlpModel,
    opts: &EvalOptions,
    wmmse_cfg: &WmmseConfig,
) -> Result<EvalReport> {
    let first = instances.first().ok_or_else(|| Error::invalid("test set has no samples"))?;
    check_model(model, first.feature_dim(), first.num_users())?;
    let dnn = dnn_powers(model, instances, instances, opts.binarize)?;
    let mut meta = BTreeMap::new();
    meta.insert("scenario".into(), scenario_name(first));
    assemble(instances, dnn, opts, wmmse_cfg, meta)
}

fn scenario_name(inst: &ProblemInstance) -> String {
    match inst.kind() {
        ChannelKind::Ic => format!("ic_k{}", inst.num_users()),
        ChannelKind::Imac { num_cells } => format!("imac_n{}_k{}", num_cells, inst.num_users()),
    }
}

/// Sum-rate comparison on a labeled test set. The WMMSE column is recomputed
/// with the dataset's labeling settings rather than read from the labels.
pub fn evaluate(test_set: &Dataset, model: &MlpModel, opts: &EvalOptions) -> Result<EvalReport> {
    let cfg = opts.wmmse.clone().unwrap_or_else(|| default_wmmse(test_set.meta.obj_tol, test_set.meta.max_iter));
    let mut report = evaluate_instances(&test_set.instances, model, opts, &cfg)?;
    report.metadata.insert("dataset_seed".into(), test_set.meta.seed.to_string());
    report.metadata.insert("generator".into(), test_set.meta.generator.clone());
    Ok(report)
}

/// Embeds a `K/2`-user IC instance into a `K`-user one; absent users take the
/// highest indices and their rows and columns are zero.
pub fn zero_pad(inst: &ProblemInstance, num_users: usize) -> Result<ProblemInstance> {
    if inst.kind() != ChannelKind::Ic {
        return Err(Error::invalid("zero padding applies to IC instances"));
    }
    let k = inst.num_users();
    if k > num_users {
        return Err(Error::invalid(format!("cannot pad {k} users into {num_users}")));
    }
    let mut gains = vec![0.0; num_users * num_users];
    for r in 0..k {
        gains[r * num_users..r * num_users + k].copy_from_slice(&inst.gains()[r * k..(r + 1) * k]);
    }
    ProblemInstance::ic(num_users, gains, inst.noise()[0], inst.p_max())
}

/// Evaluates a model trained for `K` users on `K/2`-user instances. The DNN
/// sees zero-padded inputs; its first `K/2` outputs are scored on the true
/// `K/2`-user instances, where every baseline also runs.
pub fn half_user_eval(test_set: &Dataset, model: &MlpModel, opts: &EvalOptions) -> Result<EvalReport> {
    let k = model.output_dim();
    if !k.is_multiple_of(2) {
        return Err(Error::invalid(format!("half-user test needs an even K, model has K={k}")));
    }
    if test_set.num_users() != k / 2 {
        return Err(Error::invalid(format!(
            "half-user test set must have {} users, found {}",
            k / 2,
            test_set.num_users()
        )));
    }
    check_model(model, k * k, k)?;
    let padded = test_set.instances.iter().map(|i| zero_pad(i, k)).collect::<Result<Vec<_>>>()?;
    let dnn = dnn_powers(model, &padded, &test_set.instances, opts.binarize)?;
    let cfg = opts.wmmse.clone().unwrap_or_else(|| default_wmmse(test_set.meta.obj_tol, test_set.meta.max_iter));
    let mut meta = BTreeMap::new();
    meta.insert("scenario".into(), format!("half_user_k{}_of_{k}", k / 2));
    meta.insert("dataset_seed".into(), test_set.meta.seed.to_string());
    assemble(&test_set.instances, dnn, opts, &cfg, meta)
}

/// One evaluation per shifted `(cell_radius, inner_radius)` geometry, each on
/// `n` fresh IMAC instances with the model's (N, K).
pub fn geometry_shift_eval(
    model: &MlpModel,
    trained: &Imac,
    shifts: &[(f64, f64)],
    n: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<Vec<((f64, f64), EvalReport)>> {
    check_model(model, trained.num_users * trained.num_cells, trained.num_users)?;
    let cfg = opts.wmmse.clone().unwrap_or_default();
    shifts
        .iter()
        .enumerate()
        .map(|(i, &(r_cell, r_inner))| {
            let geo = Imac { cell_radius: r_cell, inner_radius: r_inner, ..*trained };
            let instances = geo.generate(n, rng::derive(seed, i as u64))?;
            let mut report = evaluate_instances(&instances, model, opts, &cfg)?;
            report.metadata.insert("cell_radius".into(), r_cell.to_string());
            report.metadata.insert("inner_radius".into(), r_inner.to_string());
            Ok(((r_cell, r_inner), report))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_gaussian_ic, label_dataset};
    use crate::neural::{init_model, Layer, OutputActivation};

    #[test]
    fn cdf_of_two_samples() {
        assert_eq!(empirical_cdf(&[3.0, 1.0]), vec![(1.0, 0.5), (3.0, 1.0)]);
        assert_eq!(empirical_cdf(&[2.0, 2.0, 1.0, 2.0]), vec![(1.0, 0.25), (2.0, 1.0)]);
    }

    #[test]
    fn histogram_counts_every_sample() {
        let a = [0.0, 0.5, 1.0, 2.0];
        let h = histogram(&[(Policy::Dnn, &a), (Policy::Wmmse, &[2.0][..])], 4);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(h.counts[&Policy::Dnn], vec![1, 1, 1, 1]);
        assert_eq!(h.counts[&Policy::Wmmse], vec![0, 0, 0, 1]);
    }

    /// Model whose output equals the WMMSE labels of one fixed instance for
    /// every input: zero weights, bias = labels.
    fn constant_model(k: usize, p: &[f64]) -> MlpModel {
        let mut m = init_model(&[k * k, 4, k], OutputActivation::Clamp { p_max: 1.0 }, 1).unwrap();
        m.layers[1] = Layer::zeros(4, k);
        m.layers[1].bias.iter_mut().zip(p).for_each(|(b, v)| *b = *v);
        m
    }

    #[test]
    fn label_reproducing_model_scores_100_percent() {
        let data = label_dataset(generate_gaussian_ic(3, 1, 5).unwrap(), &WmmseConfig::default()).unwrap();
        let model = constant_model(3, data.labels[0].as_slice());
        let r = evaluate(&data, &model, &EvalOptions::default()).unwrap();
        assert!((r.dnn_over_wmmse_ratio - 100.0).abs() < 1e-9, "{}", r.dnn_over_wmmse_ratio);
        assert_eq!(r.average(Policy::Wmmse), sum_rate(&data.instances[0], data.labels[0].as_slice()).unwrap());
    }

    #[test]
    fn report_invariants() {
        let data = label_dataset(generate_gaussian_ic(4, 64, 9).unwrap(), &WmmseConfig::default()).unwrap();
        let mut model = init_model(&[16, 8, 4], OutputActivation::Clamp { p_max: 1.0 }, 3).unwrap();
        model.layers[1].bias.fill(0.5);
        for binarize in [false, true] {
            let opts = EvalOptions { binarize, ..Default::default() };
            let r = evaluate(&data, &model, &opts).unwrap();
            assert_eq!(r.n_samples, 64);
            for p in &r.policies {
                assert!(p.cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
                assert_eq!(p.cdf.last().unwrap().1, 1.0);
                assert_eq!(r.histogram.counts[&p.policy].iter().sum::<usize>(), 64);
            }
            let ratio = 100.0 * r.average(Policy::Dnn) / r.average(Policy::Wmmse);
            assert!(
                (r.dnn_over_wmmse_ratio - ratio).abs() <= 1e-12 * ratio && ratio > 0.0,
                "{} {ratio}",
                r.dnn_over_wmmse_ratio
            );
            // the WMMSE column is a rerun of the solver
            let rerun: Vec<f64> = data
                .instances
                .iter()
                .map(|i| sum_rate(i, wmmse(i, &WmmseConfig::default()).unwrap().allocation.as_slice()).unwrap())
                .collect();
            assert_eq!(r.policy(Policy::Wmmse).rates, rerun);
            let again = evaluate(&data, &model, &opts).unwrap();
            for (a, b) in again.policies.iter().zip(&r.policies) {
                assert_eq!((&a.rates, a.avg_rate), (&b.rates, b.avg_rate));
            }
        }
    }

    #[test]
    fn binarized_outputs_are_on_off() {
        let data = label_dataset(generate_gaussian_ic(4, 16, 2).unwrap(), &WmmseConfig::default()).unwrap();
        let model = init_model(&[16, 8, 4], OutputActivation::Clamp { p_max: 1.0 }, 4).unwrap();
        let (p, _) = dnn_powers(&model, &data.instances, &data.instances, true).unwrap();
        assert!(p.iter().flatten().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn zero_padding_layout() {
        let inst = ProblemInstance::ic(2, vec![1.0, 2.0, 3.0, 4.0], 1.0, 1.0).unwrap();
        let padded = zero_pad(&inst, 4).unwrap();
        assert_eq!(padded.gains(), &[1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // absent users add no rate and no interference
        let p = [0.3, 0.7, 1.0, 1.0];
        assert_eq!(sum_rate(&padded, &p).unwrap(), sum_rate(&inst, &p[..2]).unwrap());
    }

    #[test]
    fn half_user_rejects_bad_shapes() {
        let data = label_dataset(generate_gaussian_ic(2, 4, 2).unwrap(), &WmmseConfig::default()).unwrap();
        let odd = init_model(&[9, 4, 3], OutputActivation::Clamp { p_max: 1.0 }, 4).unwrap();
        assert!(matches!(half_user_eval(&data, &odd, &EvalOptions::default()), Err(Error::InvalidArgument(_))));
        let six = init_model(&[36, 4, 6], OutputActivation::Clamp { p_max: 1.0 }, 4).unwrap();
        assert!(half_user_eval(&data, &six, &EvalOptions::default()).is_err());
        let four = init_model(&[16, 4, 4], OutputActivation::Clamp { p_max: 1.0 }, 4).unwrap();
        let r = half_user_eval(&data, &four, &EvalOptions::default()).unwrap();
        assert_eq!(r.n_samples, 4);
    }

    #[test]
    fn unshifted_geometry_matches_plain_evaluation() {
        let imac = Imac::new(2, 4, 100.0, 0.0);
        let model = init_model(&[8, 8, 4], OutputActivation::Clamp { p_max: 1.0 }, 4).unwrap();
        let opts = EvalOptions::default();
        let out = geometry_shift_eval(&model, &imac, &[(100.0, 0.0)], 20, 11, &opts).unwrap();
        let instances = imac.generate(20, rng::derive(11, 0)).unwrap();
        let plain = evaluate_instances(&instances, &model, &opts, &WmmseConfig::default()).unwrap();
        assert_eq!(out[0].1.dnn_over_wmmse_ratio, plain.dnn_over_wmmse_ratio);
        let wrong = Imac::new(3, 4, 100.0, 0.0);
        assert!(geometry_shift_eval(&model, &wrong, &[(100.0, 0.0)], 5, 1, &opts).is_err());
    }

    #[test]
    fn empty_set_is_rejected() {
        let model = init_model(&[4, 4, 2], OutputActivation::Clamp { p_max: 1.0 }, 4).unwrap();
        assert!(evaluate_instances(&[], &model, &EvalOptions::default(), &WmmseConfig::default()).is_err());
    }
}
