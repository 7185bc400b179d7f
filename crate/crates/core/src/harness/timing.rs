use std::time::Instant;

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use super::features;
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::neural::{MlpF32, MlpModel};
use crate::wmmse::{wmmse, WmmseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F64,
    /// Inference through [`MlpModel::to_f32`]; the input batch is converted
    /// before timing starts.
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub repetitions: usize,
    /// Run both policies on the rayon pool instead of the calling thread.
    pub parallel: bool,
    pub precision: Precision,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { repetitions: 5, parallel: false, precision: Precision::F64 }
    }
}

/// Wall-clock medians of computing allocations for a whole test set.
/// Feature assembly and I/O are excluded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingTable {
    pub n_samples: usize,
    pub repetitions: usize,
    pub parallel: bool,
    pub precision: Precision,
    pub dnn_s: f64,
    pub wmmse_s: f64,
    /// `dnn_s / wmmse_s`.
    pub time_ratio: f64,
    pub dnn_runs: Vec<f64>,
    pub wmmse_runs: Vec<f64>,
}

impl TimingTable {
    pub fn speedup(&self) -> f64 {
        self.wmmse_s / self.dnn_s
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

enum Net<'a> {
    F64(&'a MlpModel, Array2<f64>),
    F32(MlpF32, Array2<f32>),
}

impl Net<'_> {
    fn run(&self, rows: usize, parallel: bool) -> Result<f64> {
        let chunk = if parallel { rows.div_ceil(rayon::current_num_threads()).max(1) } else { rows };
        match self {
            Net::F64(m, x) => {
                let x = x.slice(s![..rows, ..]);
                if !parallel {
                    return Ok(m.predict(x)?.sum());
                }
                let parts: Vec<_> = x.axis_chunks_iter(Axis(0), chunk).collect();
                parts.into_par_iter().map(|c| m.predict(c).map(|p| p.sum())).sum()
            }
            Net::F32(m, x) => {
                let x = x.slice(s![..rows, ..]);
                if !parallel {
                    return Ok(f64::from(m.predict(x)?.sum()));
                }
                let parts: Vec<_> = x.axis_chunks_iter(Axis(0), chunk).collect();
                parts.into_par_iter().map(|c| m.predict(c).map(|p| f64::from(p.sum()))).sum()
            }
        }
    }
}

fn run_wmmse(instances: &[ProblemInstance], cfg: &WmmseConfig, parallel: bool) -> Result<f64> {
    let one = |inst| wmmse(inst, cfg).map(|o| o.allocation.as_slice().iter().sum::<f64>());
    if parallel {
        instances.par_iter().map(one).sum()
    } else {
        instances.iter().map(one).sum()
    }
}

/// Times a batch DNN forward pass and per-sample WMMSE over `instances`,
/// after one untimed warm-up run of each. Both run on the calling thread
/// unless `opts.parallel`, in which case both use the rayon pool.
pub fn bench_timing(
    instances: &[ProblemInstance],
    model: &MlpModel,
    cfg: &WmmseConfig,
    opts: &BenchOptions,
) -> Result<TimingTable> {
    if instances.is_empty() {
        return Err(Error::invalid("timing needs at least one sample"));
    }
    if opts.repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let x = features(instances, model.input_dim())?;
    crate::error::check_dim(instances[0].num_users(), model.output_dim())?;
    let net = match opts.precision {
        Precision::F64 => Net::F64(model, x),
        Precision::F32 => Net::F32(model.to_f32(), x.mapv(|v| v as f32)),
    };
    let n = instances.len();
    let mut sink = net.run(1, opts.parallel)? + run_wmmse(&instances[..1], cfg, opts.parallel)?;
    let (mut dnn_runs, mut wmmse_runs) = (Vec::new(), Vec::new());
    for _ in 0..opts.repetitions {
        let t = Instant::now();
        sink += net.run(n, opts.parallel)?;
        dnn_runs.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        sink += run_wmmse(instances, cfg, opts.parallel)?;
        wmmse_runs.push(t.elapsed().as_secs_f64());
    }
    std::hint::black_box(sink);
    let (dnn_s, wmmse_s) = (median(&dnn_runs), median(&wmmse_runs));
    Ok(TimingTable {
        n_samples: n,
        repetitions: opts.repetitions,
        parallel: opts.parallel,
        precision: opts.precision,
        dnn_s,
        wmmse_s,
        time_ratio: dnn_s / wmmse_s,
        dnn_runs,
        wmmse_runs,
    })
}
