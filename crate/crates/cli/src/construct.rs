//! `construct`: build a multiplication, division or unrolled-WMMSE network,
//! save it, and check it on random inputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rand::Rng;
use wmmse_learn::constructive::{
    build_div_net, build_mul_net, build_wmmse_net, plan_bits, save_graph, wmmse_error_amplifier, AdmissibleSet,
    ArithNet, NetInit, UnitGraph, WmmseNetConfig,
};
use wmmse_learn::rng::substream;
use wmmse_learn::wmmse::{wmmse_iterates, Init};

use crate::{Usage, VerificationFailed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Op {
    Mul,
    Div,
    Wmmse,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long, value_enum)]
    op: Op,
    /// Fractional bits `n` (default 10 for mul/div; planned from `--eps` for wmmse).
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    xmax: f64,
    #[arg(long, default_value_t = 1.0)]
    ymax: f64,
    #[arg(long, default_value_t = 1.0)]
    zmax: f64,
    /// Random test points (default 10000, or 100 instances for wmmse).
    #[arg(long)]
    sweep: Option<usize>,
    /// Where to save the graph.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-point verification CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Users (wmmse).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Unrolled iterations (wmmse).
    #[arg(long, default_value_t = 2)]
    iters: usize,
    #[arg(long, default_value_t = 0.5)]
    hmin: f64,
    #[arg(long, default_value_t = 1.0)]
    hmax: f64,
    /// Lower bound on the sum of amplitudes along every iterate.
    #[arg(long, default_value_t = 0.5)]
    vmin: f64,
    #[arg(long, default_value_t = 1.0)]
    p_max: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Take `v^0` as extra inputs instead of fixing it at full power.
    #[arg(long)]
    input_init: bool,
    /// Target accuracy used to plan `n` when `--bits` is omitted.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Largest accepted deviation from the solver iterates (default `--eps`).
    #[arg(long)]
    tol: Option<f64>,
}

pub fn construct(a: &ConstructArgs, seed: u64) -> Result<()> {
    match a.op {
        Op::Mul | Op::Div => arith(a, seed),
        Op::Wmmse => unrolled(a, seed),
    }
}

fn save(a: &ConstructArgs, g: &UnitGraph) -> Result<()> {
    if let Some(path) = &a.out {
        save_graph(path, g).with_context(|| format!("writing {}", path.display()))?;
    }
    let c = g.counts();
    println!("{} ReLU, {} binary, {} affine units; {} layers", c.relu, c.binary, c.affine, c.layers);
    Ok(())
}

fn report_writer(a: &ConstructArgs, header: &str) -> Result<Option<BufWriter<File>>> {
    let Some(path) = &a.report else { return Ok(None) };
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
    writeln!(w, "{header}")?;
    Ok(Some(w))
}

fn sample_point(net: &ArithNet, a: &ConstructArgs, r: &mut impl Rng) -> (f64, f64) {
    loop {
        let (x, y) = match a.op {
            Op::Mul => (r.random_range(0.0..=a.xmax), r.random_range(0.0..=a.ymax)),
            _ => {
                let y = r.random_range(0.0..=a.ymax);
                (r.random_range(0.0..=1.0) * a.zmax * y, y)
            }
        };
        if net.domain.contains(x, y) {
            return (x, y);
        }
    }
}

fn arith(a: &ConstructArgs, seed: u64) -> Result<()> {
    let bits = a.bits.unwrap_or(10);
    let net = match a.op {
        Op::Mul => build_mul_net(a.xmax, a.ymax, bits)?,
        _ => build_div_net(a.zmax, a.ymax, bits)?,
    };
    save(a, &net.graph)?;
    let sweep = a.sweep.unwrap_or(10_000);
    let mut w = report_writer(a, "x,y,truth,output,error,bound")?;
    let mut r = substream(seed, 0);
    let (mut worst, mut violations) = (0.0f64, 0usize);
    for _ in 0..sweep {
        let (x, y) = sample_point(&net, a, &mut r);
        let (err, ok) = net.exact_error(x, y)?;
        worst = worst.max(err);
        violations += usize::from(!ok);
        if let Some(w) = &mut w {
            writeln!(w, "{x},{y},{},{},{err},{}", net.truth(x, y), net.eval(x, y), net.bound)?;
        }
    }
    if let Some(w) = &mut w {
        w.flush()?;
    }
    println!("{sweep} points: max error {worst:e}, bound {:e}, {violations} violations", net.bound);
    if violations > 0 {
        return Err(VerificationFailed(format!("{violations} of {sweep} points exceed the bound")).into());
    }
    Ok(())
}

fn unrolled(a: &ConstructArgs, seed: u64) -> Result<()> {
    let adm = AdmissibleSet {
        num_users: a.k,
        h_min: a.hmin,
        h_max: a.hmax,
        v_min: a.vmin,
        p_max: a.p_max,
        sigma: a.sigma,
        alpha_min: 1.0,
        alpha_max: 1.0,
    };
    let bits = match a.bits {
        Some(b) => b,
        None => plan_bits(wmmse_error_amplifier(&adm)?, a.iters, a.eps)?,
    };
    if bits > 60 {
        return Err(Usage(format!("{bits} bits exceed f64 resolution; pass a smaller --bits or a larger --eps")).into());
    }
    let mut cfg = WmmseNetConfig::new(adm, a.iters, bits);
    cfg.target_eps = a.eps;
    if a.input_init {
        cfg.init = NetInit::Input;
    }
    let net = build_wmmse_net(&cfg)?;
    for msg in &net.graph.warnings {
        eprintln!("warning: {msg}");
    }
    save(a, &net.graph)?;
    println!(
        "n = {bits} bits (planned {}), G = {:e}, certified bound {:e}",
        net.planned_bits, net.amplifier, net.certified_bound
    );

    let tol = a.tol.unwrap_or(a.eps);
    let sweep = a.sweep.unwrap_or(100);
    let draws = adm.sample(sweep, a.iters, &cfg.weights, seed)?;
    let v0 = vec![a.p_max.sqrt(); a.k];
    let mut w = report_writer(a, "sample,user,truth,output,error,bound")?;
    let (mut worst, mut violations) = (0.0f64, 0usize);
    for (i, inst) in draws.iter().enumerate() {
        let truth = wmmse_iterates(inst, &Init::FullPower, a.iters)?;
        let out = net.eval(inst, a.input_init.then_some(v0.as_slice()))?;
        for (user, (o, v)) in out.iter().zip(&truth[a.iters]).enumerate() {
            let (t, err) = (v * v, (o - v * v).abs());
            worst = worst.max(err);
            violations += usize::from(err.is_nan() || err > tol);
            if let Some(w) = &mut w {
                writeln!(w, "{i},{user},{t},{o},{err},{tol}")?;
            }
        }
    }
    if let Some(w) = &mut w {
        w.flush()?;
    }
    println!("{sweep} admissible instances: max |net - v^2| {worst:e}, tolerance {tol:e}, {violations} violations");
    if violations > 0 {
        return Err(VerificationFailed(format!("{violations} outputs deviate by more than {tol:e}")).into());
    }
    Ok(())
}
