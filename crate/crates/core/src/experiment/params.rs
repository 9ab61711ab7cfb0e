//! `params.bin`: the final network as a little-endian binary dump.
//!
//! ```text
//! "MPBN"  u32 version  [u8; 32] config hash  u32 kind  u32 layers
//! layers × (u32 rows, u32 cols)
//! per layer: rows·cols hidden weights (row-major), then gamma, beta,
//!            running_mean, running_var (rows each), momentum, eps
//! ```
//!
//! Every real is an `f64`. `kind` is 0 for a binarized network and 1 for the
//! full-precision control.

use std::path::Path;

use crate::bnn::{Activation, BatchNormParams, LayerParams, Network, WeightMode};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const PARAMS_MAGIC: &[u8; 4] = b"MPBN";
pub const PARAMS_VERSION: u32 = 1;

const KIND_BINARIZED: u32 = 0;
const KIND_FULL_PRECISION: u32 = 1;

fn kind_of(net: &Network) -> Result<u32> {
    match (net.activation(), net.weight_mode()) {
        (Activation::Sign, WeightMode::Binary) => Ok(KIND_BINARIZED),
        (Activation::Tanh, WeightMode::Real) => Ok(KIND_FULL_PRECISION),
        (a, w) => Err(Error::InvalidArgument(format!(
            "no parameter-file kind for {a:?} activations with {w:?} weights"
        ))),
    }
}

pub fn encode_params(net: &Network, config_hash: &[u8; 32]) -> Result<Vec<u8>> {
    let kind = kind_of(net)?;
    let mut out = Vec::new();
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    out.extend_from_slice(config_hash);
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&(net.num_layers() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.width() as u32).to_le_bytes());
        out.extend_from_slice(&(l.fan_in() as u32).to_le_bytes());
    }
    let mut put = |xs: &[f64]| {
        xs.iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes()))
    };
    for l in net.layers() {
        put(l.hidden.data());
        put(&l.bn.gamma);
        put(&l.bn.beta);
        put(&l.bn.running_mean);
        put(&l.bn.running_var);
        put(&[l.bn.momentum, l.bn.eps]);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::BadParamFile(format!(
                    "truncated: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::BadParamFile("layer too large".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses a parameter file, returning the network and the embedded config
/// hash. The length must match the declared shapes exactly.
pub fn decode_params(bytes: &[u8]) -> Result<(Network, [u8; 32])> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != PARAMS_MAGIC {
        return Err(Error::BadParamFile("bad magic, expected \"MPBN\"".into()));
    }
    let version = r.u32()?;
    if version != PARAMS_VERSION {
        return Err(Error::BadParamFile(format!(
            "unsupported version {version}, expected {PARAMS_VERSION}"
        )));
    }
    let hash: [u8; 32] = r.take(32)?.try_into().unwrap();
    let (activation, weight_mode) = match r.u32()? {
        KIND_BINARIZED => (Activation::Sign, WeightMode::Binary),
        KIND_FULL_PRECISION => (Activation::Tanh, WeightMode::Real),
        k => return Err(Error::BadParamFile(format!("unknown network kind {k}"))),
    };
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(Error::BadParamFile("no layers".into()));
    }
    let dims = (0..count)
        .map(|_| Ok((r.u32()? as usize, r.u32()? as usize)))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(count);
    for &(rows, cols) in &dims {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::BadParamFile(format!("layer {rows}x{cols} too large")))?;
        let hidden = Matrix::new(rows, cols, r.f64s(n)?)?;
        let gamma = r.f64s(rows)?;
        let beta = r.f64s(rows)?;
        let running_mean = r.f64s(rows)?;
        let running_var = r.f64s(rows)?;
        let tail = r.f64s(2)?;
        layers.push(LayerParams {
            hidden,
            bn: BatchNormParams {
                gamma,
                beta,
                running_mean,
                running_var,
                momentum: tail[0],
                eps: tail[1],
            },
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::BadParamFile(format!(
            "{} trailing bytes after the last layer",
            bytes.len() - r.pos
        )));
    }
    let net = Network::from_layers(layers, activation, weight_mode)
        .map_err(|e| Error::BadParamFile(e.to_string()))?;
    Ok((net, hash))
}

pub fn save_params(net: &Network, config_hash: &[u8; 32], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_params(net, config_hash)?).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<(Network, [u8; 32])> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_params(&bytes)
}
