//! `wmmse-learn`: generate WMMSE-labeled datasets, train and evaluate MLP
//! surrogates, time them, and build constructive networks.
//!
//! Exit codes: 0 success, 1 usage or invalid parameters, 2 verification
//! failure, 3 I/O failure.

mod config;
mod construct;
mod data;
mod evaluate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use wmmse_learn::rng::{DEFAULT_SEED, SEED_ENV};

#[derive(Debug, Parser)]
#[command(name = "wmmse-learn", version, about = "Learning WMMSE power control with neural networks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Seed; defaults to $WMMSE_LEARN_SEED, then 7.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores, or 1 for `bench`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// key=value file whose entries fill in flags not given on the command line.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate channels and label them with WMMSE.
    Generate(data::GenerateArgs),
    /// Train an MLP on a labeled dataset.
    Train(data::TrainArgs),
    /// Compare a trained model with WMMSE and simple baselines.
    Eval(evaluate::EvalArgs),
    /// Time batch inference against per-sample WMMSE.
    Bench(evaluate::BenchArgs),
    /// Build a constructive network and verify it on a random sweep.
    Construct(construct::ConstructArgs),
    /// Learn gradient-descent output with and without the initial point.
    GdDemo(evaluate::GdDemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Ic,
    Imac,
    /// Gaussian IC regenerated from the gain statistics of a reference dataset.
    Stats,
}

/// A check that ran to completion and found a violation.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| anyhow::anyhow!(Usage(format!("{SEED_ENV}={v:?} is not an integer")))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Invalid input detected by the CLI itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<VerificationFailed>() {
            return 2;
        }
        if cause.is::<Usage>() {
            return 1;
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<wmmse_learn::Error>() {
            return match e {
                wmmse_learn::Error::Io(_) | wmmse_learn::Error::Parse(_) => 3,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    let seed = resolve_seed(cli.global.seed)?;
    let threads = cli.global.threads.or(matches!(cli.command, Command::Bench(_)).then_some(1));
    if let Some(n) = threads {
        if n == 0 {
            return Err(Usage("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Generate(a) => data::generate(&a, seed),
        Command::Train(a) => data::train(&a, seed),
        Command::Eval(a) => evaluate::eval(&a, seed),
        Command::Bench(a) => evaluate::bench(&a, seed),
        Command::Construct(a) => construct::construct(&a, seed),
        Command::GdDemo(a) => evaluate::gd_demo(&a, seed),
    }
}

fn main() -> ExitCode {
    let args = match config::merge(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(if e.chain().any(|c| c.is::<std::io::Error>()) { 3 } else { 1 });
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
