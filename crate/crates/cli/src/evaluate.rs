//! `eval`, `bench` and `gd-demo`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use wmmse_learn::channel::read_dataset;
use wmmse_learn::harness::{
    bench_timing, evaluate, gd_demo as run_gd_demo, half_user_eval, write_reports, write_timing_csv, BenchOptions,
    EvalOptions, GdDemoConfig, Precision,
};
use wmmse_learn::neural::{load_model, MlpModel};
use wmmse_learn::rng::derive;
use wmmse_learn::WmmseConfig;

use crate::Usage;

fn load(path: &Path) -> Result<MlpModel> {
    load_model(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Labeled test dataset.
    #[arg(long)]
    data: PathBuf,
    /// Threshold DNN outputs to {0, p_max}.
    #[arg(long)]
    binarize: bool,
    /// Test a K-user model on a K/2-user dataset through zero padding.
    #[arg(long)]
    half_user: bool,
    #[arg(long, default_value = "report")]
    report_dir: PathBuf,
    /// Report file name stem.
    #[arg(long, default_value = "eval")]
    stem: String,
    /// Histogram bins.
    #[arg(long, default_value_t = 50)]
    bins: usize,
}

pub fn eval(a: &EvalArgs, seed: u64) -> Result<()> {
    let model = load(&a.model)?;
    let data = read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    if a.bins == 0 {
        return Err(Usage("--bins must be at least 1".into()).into());
    }
    let opts = EvalOptions { binarize: a.binarize, seed: derive(seed, 20), wmmse: None, hist_bins: a.bins };
    let mut report = if a.half_user { half_user_eval(&data, &model, &opts)? } else { evaluate(&data, &model, &opts)? };
    report.metadata.insert("binarize".into(), a.binarize.to_string());
    let paths = write_reports(&a.report_dir, &a.stem, &report)
        .with_context(|| format!("writing reports to {}", a.report_dir.display()))?;
    println!("{:<10} {:>12} {:>10} {:>12}", "policy", "avg_rate", "ratio_pct", "time_s");
    for p in &report.policies {
        println!("{:<10} {:>12.4} {:>10.2} {:>12.4}", p.policy.name(), p.avg_rate, p.ratio_pct, p.total_time_s);
    }
    eprintln!("wrote {}", paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    Ok(())
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Timed repetitions; the median is reported.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Run both policies on the thread pool.
    #[arg(long)]
    parallel: bool,
    /// Single-precision DNN inference.
    #[arg(long)]
    f32: bool,
    /// Timing CSV; a JSON copy is written next to it.
    #[arg(long, default_value = "timing.csv")]
    out: PathBuf,
}

pub fn bench(a: &BenchArgs, _seed: u64) -> Result<()> {
    let model = load(&a.model)?;
    let data = read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let cfg = WmmseConfig { obj_tol: data.meta.obj_tol, max_iter: data.meta.max_iter, ..Default::default() };
    let opts = BenchOptions {
        repetitions: a.reps,
        parallel: a.parallel,
        precision: if a.f32 { Precision::F32 } else { Precision::F64 },
    };
    let t = bench_timing(&data.instances, &model, &cfg, &opts)?;
    write_timing_csv(&a.out, &t).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{} samples: dnn {:.6} s, wmmse {:.6} s, time ratio {:.3}% ({:.1}x faster)",
        t.n_samples,
        t.dnn_s,
        t.wmmse_s,
        100.0 * t.time_ratio,
        t.speedup()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct GdDemoArgs {
    #[arg(long, default_value_t = 10_000)]
    n_train: usize,
    #[arg(long, default_value_t = 2000)]
    n_test: usize,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    /// Gradient-descent iterations per sample.
    #[arg(long, default_value_t = 3000)]
    iters: usize,
    /// Curve CSV: `x0,z,xt,pred_full,pred_z_only`.
    #[arg(long, default_value = "gd_demo.csv")]
    out: PathBuf,
}

pub fn gd_demo(a: &GdDemoArgs, seed: u64) -> Result<()> {
    let base = GdDemoConfig::default();
    let cfg = GdDemoConfig {
        n_train: a.n_train,
        n_test: a.n_test,
        toy: wmmse_learn::channel::GdToyConfig { iterations: a.iters, ..base.toy },
        train: wmmse_learn::neural::TrainConfig { max_epochs: a.epochs, ..base.train.clone() },
        ..base
    };
    let report = run_gd_demo(&cfg, seed)?;
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(&a.out)?);
        writeln!(w, "x0,z,xt,pred_full,pred_z_only")?;
        for r in &report.curve {
            writeln!(w, "{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4])?;
        }
        w.flush()
    };
    write().with_context(|| format!("writing {}", a.out.display()))?;
    println!("test MSE with (x0, z): {:.6} ({} epochs)", report.full_test_mse, report.full_epochs);
    println!("test MSE with z only:  {:.6} ({} epochs)", report.z_only_test_mse, report.z_only_epochs);
    Ok(())
}
