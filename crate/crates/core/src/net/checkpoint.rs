//! Binary model checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! magic "GWLNET\0\0" | version u32
//! provenance: length u64, UTF-8 bytes
//! dropout_rate f64 | seed u64 | smoothing_eps f64 | class_weights 7×f64
//! standardizer mean 2×f64 | std 2×f64
//! 8 tensors in declared order: rank u32, dims rank×u64, data as f64
//! ```

use std::fs;
use std::path::Path;

use super::loss::LossSpec;
use super::params::{NetParams, Weights};
use super::predict::TrainedModel;
use super::standardize::Standardizer;
use super::tensor::Tensor;
use crate::datamodel::{CHANNELS, N_CLASSES};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GWLNET\0\0";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(model: &TrainedModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (model.params.weights.len() + 64));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.provenance.len() as u64).to_le_bytes());
    out.extend_from_slice(model.provenance.as_bytes());
    let put = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&v.to_le_bytes());
    put(&mut out, model.params.dropout_rate);
    out.extend_from_slice(&model.seed.to_le_bytes());
    put(&mut out, model.loss_spec.smoothing_eps);
    for w in model.loss_spec.class_weights {
        put(&mut out, w);
    }
    for v in model
        .standardizer
        .mean
        .iter()
        .chain(&model.standardizer.std)
    {
        put(&mut out, *v);
    }
    for t in model.params.weights.tensors() {
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in t.data() {
            put(&mut out, *v);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Checkpoint(format!(
                    "truncated while reading {what} at byte {}",
                    self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic").ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("not a model checkpoint".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "version {version}, expected {VERSION}"
        )));
    }
    let len = r.u64("provenance length")? as usize;
    let provenance = String::from_utf8(r.take(len, "provenance")?.to_vec())
        .map_err(|_| Error::Checkpoint("provenance is not UTF-8".into()))?;
    let dropout_rate = r.f64("dropout rate")?;
    let seed = r.u64("seed")?;
    let eps = r.f64("smoothing eps")?;
    let mut class_weights = [0.0; N_CLASSES];
    for w in &mut class_weights {
        *w = r.f64("class weights")?;
    }
    let mut mean = [0.0; CHANNELS];
    let mut std = [0.0; CHANNELS];
    for v in mean.iter_mut().chain(std.iter_mut()) {
        *v = r.f64("standardizer")?;
    }
    let mut tensors = Vec::with_capacity(8);
    for _ in 0..8 {
        let rank = r.u32("tensor rank")? as usize;
        if rank > 4 {
            return Err(Error::Checkpoint(format!("tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64("tensor shape")? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n.min(bytes.len() / 8));
        for _ in 0..n {
            data.push(r.f64("tensor data")?);
        }
        tensors.push(Tensor::from_vec(&shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let weights = Weights::from_tensors(tensors)?;
    if !weights.all_finite() {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    Ok(TrainedModel {
        params: NetParams::new(weights, dropout_rate)?,
        standardizer: Standardizer { mean, std },
        loss_spec: LossSpec::new(class_weights, eps)?,
        seed,
        provenance,
    })
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::init_params;

    fn model() -> TrainedModel {
        TrainedModel {
            params: init_params(5, 0.35).unwrap(),
            standardizer: Standardizer {
                mean: [1013.1, 5521.7],
                std: [7.25, 81.0 / 3.0],
            },
            loss_spec: LossSpec::new([0.7, 1.3, 1.0, 0.9, 1.1, 1.2, 0.8], 0.1).unwrap(),
            seed: u64::MAX - 3,
            provenance: "lr=0.001\nnote=ümlaut".into(),
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let m = model();
        let bytes = encode_checkpoint(&m);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_checkpoint(&model());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra).is_err());
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(decode_checkpoint(&bad)
            .unwrap_err()
            .to_string()
            .contains("version 2"));
        bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
    }
}
