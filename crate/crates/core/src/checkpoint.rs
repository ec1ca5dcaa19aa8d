//! Binary model checkpoints.
//!
//! ```text
//! magic      4 bytes   "EVNC"
//! version    u32 LE    1
//! layers     u32 LE    number of manifest entries
//! manifest   13 bytes per layer: kind u8, then three u32 LE
//!              0 conv        (in_channels, out_channels, kernel)
//!              1 reflect pad (pad, 0, 0)
//!              2 batch norm  (channels, 0, 0)
//!              3 relu        (0, 0, 0)
//! tensors    f64 LE, in manifest order:
//!              conv: weights [out, in, k, k], bias [out]
//!              batch norm: gamma, beta, running mean, running var
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{BatchNorm, Conv2d, Layer, Mode, Network};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"EVNC";
pub const VERSION: u32 = 1;

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let (kind, dims) = match layer {
            Layer::ConvValid(c) => (0u8, [c.in_channels(), c.out_channels(), c.kernel_size()]),
            Layer::ReflectPad { pad } => (1, [*pad, 0, 0]),
            Layer::BatchNorm(b) => (2, [b.channels(), 0, 0]),
            Layer::Relu { .. } => (3, [0, 0, 0]),
        };
        out.push(kind);
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    let mut put = |values: &[f64]| {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    for layer in net.layers() {
        match layer {
            Layer::ConvValid(c) => {
                put(c.weights.value.data());
                put(c.bias.value.data());
            }
            Layer::BatchNorm(b) => {
                put(b.gamma.value.data());
                put(b.beta.value.data());
                put(&b.running_mean);
                put(&b.running_var);
            }
            _ => {}
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos,
                format!("truncated checkpoint: missing {} bytes", n - (self.bytes.len() - self.pos)),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format(0, "bad checkpoint magic"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()?;
    let mut manifest = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let at = r.pos;
        let kind = r.take(1)?[0];
        let dims = [r.u32()?, r.u32()?, r.u32()?];
        manifest.push((at, kind, dims));
    }
    let mut layers = Vec::with_capacity(manifest.len());
    for (at, kind, [a, b, k]) in manifest {
        let layer = match kind {
            0 => {
                if a == 0 || b == 0 || k == 0 {
                    return Err(Error::format(at, "conv layer with zero dimension"));
                }
                let w = Tensor::new(&[b, a, k, k], r.f64s(b * a * k * k)?)?;
                let mut conv = Conv2d::new(w)?;
                conv.bias.value = Tensor::new(&[b], r.f64s(b)?)?;
                Layer::ConvValid(conv)
            }
            1 => Layer::ReflectPad { pad: a },
            2 => {
                if a == 0 {
                    return Err(Error::format(at, "batch norm with zero channels"));
                }
                let mut bn = BatchNorm::new(a);
                bn.gamma.value = Tensor::new(&[a], r.f64s(a)?)?;
                bn.beta.value = Tensor::new(&[a], r.f64s(a)?)?;
                bn.running_mean = r.f64s(a)?;
                bn.running_var = r.f64s(a)?;
                Layer::BatchNorm(bn)
            }
            3 => Layer::relu(),
            other => return Err(Error::format(at, format!("unknown layer kind {other}"))),
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(Error::format(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut net = Network::new(layers)?;
    net.set_mode(Mode::Eval);
    Ok(net)
}

pub fn save(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Network> {
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Hex SHA-256 of the checkpoint bytes.
pub fn digest(net: &Network) -> String {
    hex::encode(Sha256::digest(to_bytes(net)))
}
