//! Labeled datasets and their CSV + sidecar metadata files.
//!
//! CSV layout: header `k,h_0,...,h_{D-1},p_0,...,p_{K-1}`, one sample per row,
//! `k` is the sample index. Gains are the instance's raw storage (receiver-major
//! for IC, user-major for IMAC). Floats are written with 17 significant digits.
//! The sidecar `<file>.meta` holds `key=value` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{ChannelKind, PowerAllocation, ProblemInstance};
use crate::wmmse::{wmmse, Init, WmmseConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: u64,
    pub kind: ChannelKind,
    pub num_users: usize,
    pub noise_power: f64,
    pub p_max: f64,
    pub obj_tol: f64,
    pub max_iter: usize,
    /// Generator-specific parameters (radii, sample counts, flags).
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<ProblemInstance>,
    pub labels: Vec<PowerAllocation>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.meta.num_users
    }

    pub fn feature_dim(&self) -> usize {
        self.instances.first().map_or(0, ProblemInstance::feature_dim)
    }

    pub fn with_generator(mut self, name: &str, seed: u64) -> Self {
        self.meta.generator = name.to_string();
        self.meta.seed = seed;
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.extra.insert(key.to_string(), value.to_string());
        self
    }
}

fn uniform_setting(instances: &[ProblemInstance]) -> Result<(ChannelKind, usize, f64, f64)> {
    let first = instances.first().ok_or_else(|| Error::invalid("dataset has no samples"))?;
    let (kind, k, noise, p_max) = (first.kind(), first.num_users(), first.noise()[0], first.p_max());
    for (index, inst) in instances.iter().enumerate() {
        let same = inst.kind() == kind
            && inst.num_users() == k
            && inst.p_max() == p_max
            && inst.noise().iter().all(|s| *s == noise)
            && inst.weights().iter().all(|a| *a == 1.0);
        if !same {
            return Err(Error::Sample {
                index,
                source: Box::new(Error::invalid(
                    "dataset instances must share channel kind, K, noise power, p_max and unit weights",
                )),
            });
        }
    }
    Ok((kind, k, noise, p_max))
}

/// Labels every instance with WMMSE. The first failing sample aborts the run
/// and is reported by index.
pub fn label_dataset(instances: Vec<ProblemInstance>, cfg: &WmmseConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (kind, num_users, noise_power, p_max) = uniform_setting(&instances)?;
    let labels = instances
        .par_iter()
        .enumerate()
        .map(|(index, inst)| {
            wmmse(inst, cfg).map(|out| out.allocation).map_err(|e| Error::Sample { index, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut extra = BTreeMap::new();
    extra.insert(
        "init".to_string(),
        match cfg.init {
            Init::FullPower => "full_power".to_string(),
            Init::Given(_) => "given".to_string(),
        },
    );
    Ok(Dataset {
        instances,
        labels,
        meta: DatasetMeta {
            generator: "unspecified".to_string(),
            seed: 0,
            kind,
            num_users,
            noise_power,
            p_max,
            obj_tol: cfg.obj_tol,
            max_iter: cfg.max_iter,
            extra,
        },
    })
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

fn format_meta(meta: &DatasetMeta) -> String {
    let mut kv: BTreeMap<&str, String> = BTreeMap::new();
    kv.insert("generator", meta.generator.clone());
    kv.insert("seed", meta.seed.to_string());
    match meta.kind {
        ChannelKind::Ic => {
            kv.insert("kind", "ic".into());
        }
        ChannelKind::Imac { num_cells } => {
            kv.insert("kind", "imac".into());
            kv.insert("n", num_cells.to_string());
        }
    }
    kv.insert("k", meta.num_users.to_string());
    kv.insert("p_max", format!("{:e}", meta.p_max));
    kv.insert("noise_power", format!("{:e}", meta.noise_power));
    kv.insert("obj_tol", format!("{:e}", meta.obj_tol));
    kv.insert("max_iter", meta.max_iter.to_string());
    let mut out = String::new();
    for (k, v) in &kv {
        writeln!(out, "{k}={v}").unwrap();
    }
    for (k, v) in &meta.extra {
        if !kv.contains_key(k.as_str()) {
            writeln!(out, "{k}={v}").unwrap();
        }
    }
    out
}

fn parse_meta(text: &str) -> Result<DatasetMeta> {
    let mut kv = BTreeMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(format!("metadata line without '=': {line}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    fn take<T: std::str::FromStr>(kv: &mut BTreeMap<String, String>, key: &str) -> Result<T> {
        let v = kv.remove(key).ok_or_else(|| Error::parse(format!("metadata is missing '{key}'")))?;
        v.parse().map_err(|_| Error::parse(format!("metadata '{key}' has invalid value '{v}'")))
    }
    let kind = match take::<String>(&mut kv, "kind")?.as_str() {
        "ic" => ChannelKind::Ic,
        "imac" => ChannelKind::Imac { num_cells: take(&mut kv, "n")? },
        other => return Err(Error::parse(format!("unknown channel kind '{other}'"))),
    };
    Ok(DatasetMeta {
        generator: take(&mut kv, "generator")?,
        seed: take(&mut kv, "seed")?,
        kind,
        num_users: take(&mut kv, "k")?,
        noise_power: take(&mut kv, "noise_power")?,
        p_max: take(&mut kv, "p_max")?,
        obj_tol: take(&mut kv, "obj_tol")?,
        max_iter: take(&mut kv, "max_iter")?,
        extra: kv,
    })
}

/// Writes `path` (CSV) and `path.meta`.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    if data.instances.len() != data.labels.len() {
        return Err(Error::invalid("instances and labels differ in length"));
    }
    uniform_setting(&data.instances)?;
    let d = data.feature_dim();
    let k = data.num_users();
    let mut w = BufWriter::new(fs::File::create(path)?);
    let mut line = String::from("k");
    for i in 0..d {
        write!(line, ",h_{i}").unwrap();
    }
    for i in 0..k {
        write!(line, ",p_{i}").unwrap();
    }
    writeln!(w, "{line}")?;
    for (idx, (inst, label)) in data.instances.iter().zip(&data.labels).enumerate() {
        line.clear();
        write!(line, "{idx}").unwrap();
        for g in inst.gains().iter().chain(label.as_slice()) {
            write!(line, ",{g:.16e}").unwrap();
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    fs::write(meta_path(path), format_meta(&data.meta))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let meta = parse_meta(&fs::read_to_string(meta_path(path))?)?;
    let k = meta.num_users;
    let d = match meta.kind {
        ChannelKind::Ic => k * k,
        ChannelKind::Imac { num_cells } => k * num_cells,
    };
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::parse("empty dataset file"))??;
    let cols = header.split(',').count();
    if cols != 1 + d + k {
        return Err(Error::parse(format!("header has {cols} columns, metadata implies {}", 1 + d + k)));
    }
    let mut instances = Vec::new();
    let mut labels = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(format!("row {row}: {e}")))?;
        if values.len() != d + k {
            return Err(Error::parse(format!("row {row}: expected {} values, found {}", d + k, values.len())));
        }
        let inst = ProblemInstance::new(
            meta.kind,
            k,
            values[..d].to_vec(),
            vec![meta.noise_power; k],
            vec![1.0; k],
            meta.p_max,
        )
        .map_err(|e| Error::Sample { index: row, source: Box::new(e) })?;
        instances.push(inst);
        labels.push(PowerAllocation::new(values[d..].to_vec()));
    }
    Ok(Dataset { instances, labels, meta })
}
