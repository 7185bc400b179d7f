//! `generate` and `train`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use ndarray::s;
use wmmse_learn::channel::{
    generate_from_stats, label_dataset, read_dataset, write_dataset, GaussianIc, Imac, STATS_MATCHED_NOISE,
};
use wmmse_learn::neural::{
    dataset_arrays, default_layer_sizes, init_model, save_model, train_with, write_history, OutputActivation,
    TrainConfig,
};
use wmmse_learn::rng::derive;
use wmmse_learn::WmmseConfig;

use crate::{Model, Usage};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Number of users.
    #[arg(long, visible_alias = "users")]
    k: Option<usize>,
    /// Number of cells (IMAC).
    #[arg(long, default_value_t = 3)]
    cells: usize,
    /// Cell radius in meters (IMAC).
    #[arg(long, default_value_t = 100.0)]
    radius: f64,
    /// Inner exclusion radius in meters (IMAC).
    #[arg(long, default_value_t = 0.0)]
    inner: f64,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    /// Noise power (default 1, or 1e-3 for `stats`).
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    p_max: f64,
    /// WMMSE stopping tolerance on the objective change.
    #[arg(long, default_value_t = 1e-5)]
    obj_tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Dataset whose gain statistics are matched (`stats`).
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn need_k(k: Option<usize>) -> Result<usize> {
    k.ok_or_else(|| Usage("--k is required for this model".into()).into())
}

pub fn generate(a: &GenerateArgs, seed: u64) -> Result<()> {
    let cfg = WmmseConfig { obj_tol: a.obj_tol, max_iter: a.max_iter, ..Default::default() };
    let data = match a.model {
        Model::Ic => {
            let g = GaussianIc { num_users: need_k(a.k)?, noise_power: a.noise.unwrap_or(1.0), p_max: a.p_max };
            label_dataset(g.generate(a.n, seed)?, &cfg)?.with_generator("ic", seed)
        }
        Model::Imac => {
            let g = Imac {
                noise_power: a.noise.unwrap_or(1.0),
                p_max: a.p_max,
                ..Imac::new(a.cells, need_k(a.k)?, a.radius, a.inner)
            };
            label_dataset(g.generate(a.n, seed)?, &cfg)?
                .with_generator("imac", seed)
                .with_param("cells", a.cells)
                .with_param("radius", a.radius)
                .with_param("inner", a.inner)
        }
        Model::Stats => {
            let path = a.reference.as_ref().ok_or_else(|| Usage("--reference is required for --model stats".into()))?;
            let reference = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
            let noise = a.noise.unwrap_or(STATS_MATCHED_NOISE);
            let instances = generate_from_stats(&reference.instances, a.n, seed, noise)?;
            label_dataset(instances, &cfg)?
                .with_generator("stats", seed)
                .with_param("reference", path.display())
                .with_param("reference_seed", reference.meta.seed)
        }
    };
    write_dataset(&a.out, &data).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote {} samples (K={}) to {}", data.len(), data.num_users(), a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled training dataset.
    #[arg(long)]
    data: PathBuf,
    /// Separate validation dataset; otherwise the tail of `--data` is held out.
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    valid_fraction: f64,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// History CSV (default: `<out>.history.csv`).
    #[arg(long)]
    history: Option<PathBuf>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "200,200,200")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1000)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = 5)]
    max_halvings: usize,
    /// Standardize input features with training-set statistics.
    #[arg(long)]
    standardize: bool,
}

fn history_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".history.csv");
    PathBuf::from(s)
}

pub fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    let data = read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let (x, y) = dataset_arrays(&data)?;
    let (tx, ty, vx, vy) = match &a.valid {
        Some(path) => {
            let valid = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
            let (vx, vy) = dataset_arrays(&valid)?;
            (x.view(), y.view(), vx, vy)
        }
        None => {
            if !(a.valid_fraction > 0.0 && a.valid_fraction < 1.0) {
                return Err(Usage("--valid-fraction must lie in (0, 1)".into()).into());
            }
            let n_valid = ((data.len() as f64 * a.valid_fraction).round() as usize).max(1);
            if n_valid >= data.len() {
                return Err(Usage(format!("{} samples are too few to hold out a validation set", data.len())).into());
            }
            let cut = data.len() - n_valid;
            let (vx, vy) = (x.slice(s![cut.., ..]).to_owned(), y.slice(s![cut.., ..]).to_owned());
            (x.slice(s![..cut, ..]), y.slice(s![..cut, ..]), vx, vy)
        }
    };
    let mut sizes = default_layer_sizes(tx.ncols(), ty.ncols());
    sizes.splice(1..sizes.len() - 1, a.hidden.iter().copied());
    let model = init_model(&sizes, OutputActivation::Clamp { p_max: data.meta.p_max }, derive(seed, 10))?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        max_epochs: a.epochs,
        patience: a.patience,
        max_halvings: a.max_halvings,
        standardize: a.standardize,
        seed: derive(seed, 11),
        ..TrainConfig::default()
    };
    eprintln!("training {sizes:?} on {} samples, validating on {}", tx.nrows(), vx.nrows());
    let out = train_with(model, (tx, ty), (vx.view(), vy.view()), &cfg, |r| {
        eprintln!(
            "epoch {:>3}  train {:.6}  valid {:.6}  lr {:.2e}",
            r.epoch, r.train_mse, r.valid_mse, r.learning_rate
        );
    })?;
    save_model(&a.out, &out.model).with_context(|| format!("writing {}", a.out.display()))?;
    let history = a.history.clone().unwrap_or_else(|| history_path(&a.out));
    write_history(&history, &out.history).with_context(|| format!("writing {}", history.display()))?;
    println!("best epoch {} valid_mse {} ({} epochs run)", out.best_epoch, out.best_valid_mse, out.history.len());
    Ok(())
}
