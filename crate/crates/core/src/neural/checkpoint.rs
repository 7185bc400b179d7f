//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic     8 bytes  "WMLPCKPT"
//! version   u32
//! n_sizes   u32, then n_sizes x u64 layer sizes
//! output    u8 (0 = clamp, 1 = linear), then p_max f64 (0 for linear)
//! norm      u8 flag; if 1, D_in means then D_in inverse std devs as f64
//! per layer: fan_in*fan_out weights (row-major), then fan_out biases
//! ```
//!
//! Training history is a CSV with header `epoch,train_mse,valid_mse,learning_rate`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{InputNorm, Layer, MlpModel, OutputActivation};
use super::train::EpochRecord;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"WMLPCKPT";
pub const VERSION: u32 = 1;

pub fn write_model(w: &mut impl Write, model: &MlpModel) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let sizes = model.layer_sizes();
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for s in &sizes {
        w.write_all(&(*s as u64).to_le_bytes())?;
    }
    let (kind, p_max) = match model.output {
        OutputActivation::Clamp { p_max } => (0u8, p_max),
        OutputActivation::Linear => (1u8, 0.0),
    };
    w.write_all(&[kind])?;
    w.write_all(&p_max.to_le_bytes())?;
    match &model.input_norm {
        Some(norm) => {
            w.write_all(&[1])?;
            for v in norm.mean.iter().chain(norm.inv_std.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        None => w.write_all(&[0])?,
    }
    for layer in &model.layers {
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::parse("truncated checkpoint"),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| Ok(f64::from_le_bytes(read_array(r)?))).collect()
}

pub fn read_model(r: &mut impl Read) -> Result<MlpModel> {
    if &read_array::<8>(r)? != MAGIC {
        return Err(Error::parse("not a model checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(Error::parse(format!("unsupported checkpoint version {version}")));
    }
    let n_sizes = u32::from_le_bytes(read_array(r)?) as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(Error::parse(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes).map(|_| Ok(u64::from_le_bytes(read_array(r)?) as usize)).collect::<Result<Vec<_>>>()?;
    if sizes.iter().any(|&s| s == 0 || s > 1 << 24) {
        return Err(Error::parse(format!("implausible layer sizes {sizes:?}")));
    }
    let [kind] = read_array::<1>(r)?;
    let p_max = f64::from_le_bytes(read_array(r)?);
    let output = match kind {
        0 if p_max > 0.0 && p_max.is_finite() => OutputActivation::Clamp { p_max },
        1 => OutputActivation::Linear,
        _ => return Err(Error::parse("invalid output activation in checkpoint")),
    };
    let input_norm = match read_array::<1>(r)? {
        [0] => None,
        [1] => {
            let mean = Array1::from(read_f64s(r, sizes[0])?);
            let inv_std = Array1::from(read_f64s(r, sizes[0])?);
            Some(InputNorm { mean, inv_std })
        }
        _ => return Err(Error::parse("invalid normalization flag in checkpoint")),
    };
    let mut layers = Vec::with_capacity(n_sizes - 1);
    for w in sizes.windows(2) {
        let weights = Array2::from_shape_vec((w[0], w[1]), read_f64s(r, w[0] * w[1])?).expect("sized buffer");
        let bias = Array1::from(read_f64s(r, w[1])?);
        layers.push(Layer { weights, bias });
    }
    let model = MlpModel { layers, output, input_norm };
    if !model.is_finite() {
        return Err(Error::parse("checkpoint contains non-finite parameters"));
    }
    Ok(model)
}

pub fn save_model(path: &Path, model: &MlpModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    read_model(&mut BufReader::new(File::open(path)?))
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,train_mse,valid_mse,learning_rate")?;
    for r in history {
        writeln!(w, "{},{:e},{:e},{:e}", r.epoch, r.train_mse, r.valid_mse, r.learning_rate)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::init_model;

    #[test]
    fn round_trip_is_exact() {
        let mut m = init_model(&[6, 7, 3], OutputActivation::Clamp { p_max: 2.5 }, 4).unwrap();
        m.layers[0].bias[2] = -0.125;
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf.len(), 8 + 4 + 4 + 3 * 8 + 1 + 8 + 1 + 8 * (6 * 7 + 7 + 7 * 3 + 3));
        assert_eq!(read_model(&mut buf.as_slice()).unwrap(), m);

        let mut lin = init_model(&[2, 3, 1], OutputActivation::Linear, 1).unwrap();
        lin.input_norm = Some(InputNorm { mean: Array1::from(vec![0.5, 1.0]), inv_std: Array1::from(vec![2.0, 4.0]) });
        let mut buf = Vec::new();
        write_model(&mut buf, &lin).unwrap();
        assert_eq!(read_model(&mut buf.as_slice()).unwrap(), lin);
    }

    #[test]
    fn weights_are_row_major_little_endian() {
        let mut m = init_model(&[2, 2], OutputActivation::Linear, 0).unwrap();
        m.layers[0].weights = ndarray::array![[1.0, 2.0], [3.0, 4.0]];
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let body = &buf[8 + 4 + 4 + 16 + 1 + 8 + 1..];
        let vals: Vec<f64> = body.chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(vals, vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn corrupt_inputs_are_parse_errors() {
        let m = init_model(&[2, 2], OutputActivation::Linear, 0).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert!(matches!(read_model(&mut &buf[..buf.len() - 1]), Err(Error::Parse(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(&mut bad.as_slice()), Err(Error::Parse(_))));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(read_model(&mut bad.as_slice()), Err(Error::Parse(_))));
    }

    #[test]
    fn files_and_history() {
        let dir = tempfile::tempdir().unwrap();
        let m = init_model(&[3, 4, 2], OutputActivation::Clamp { p_max: 1.0 }, 2).unwrap();
        let p = dir.path().join("m.ckpt");
        save_model(&p, &m).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
        assert!(matches!(load_model(&dir.path().join("missing")), Err(Error::Io(_))));

        let h = dir.path().join("h.csv");
        let rec = EpochRecord { epoch: 1, train_mse: 0.5, valid_mse: 0.25, learning_rate: 1e-3 };
        write_history(&h, &[rec]).unwrap();
        let text = std::fs::read_to_string(&h).unwrap();
        assert_eq!(text, "epoch,train_mse,valid_mse,learning_rate\n1,5e-1,2.5e-1,1e-3\n");
    }
}
