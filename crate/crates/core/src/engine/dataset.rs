use crate::data::PatchSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Patch pairs in CHW layout, ready for batching into NCHW tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: usize,
    pub size: usize,
    noisy: Vec<Vec<f64>>,
    clean: Vec<Vec<f64>>,
}

pub fn hwc_to_chw(src: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for (p, px) in src.chunks_exact(c).enumerate() {
        for (b, v) in px.iter().enumerate() {
            out[b * h * w + p] = *v;
        }
    }
    out
}

pub fn chw_to_hwc(src: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for (p, px) in out.chunks_exact_mut(c).enumerate() {
        for (b, v) in px.iter_mut().enumerate() {
            *v = src[b * h * w + p];
        }
    }
    out
}

impl Dataset {
    pub fn from_patches(ps: &PatchSet) -> Self {
        let (s, c) = (ps.size, ps.channels);
        Dataset {
            channels: c,
            size: s,
            noisy: ps.patches.iter().map(|p| hwc_to_chw(&p.noisy, s, s, c)).collect(),
            clean: ps.patches.iter().map(|p| hwc_to_chw(&p.clean, s, s, c)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy.is_empty()
    }

    /// Concatenation of `self` and `other` (same geometry).
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if (self.channels, self.size) != (other.channels, other.size) {
            return Err(Error::InvalidShape("datasets differ in patch geometry".into()));
        }
        let mut out = self.clone();
        out.noisy.extend(other.noisy.iter().cloned());
        out.clean.extend(other.clean.iter().cloned());
        Ok(out)
    }

    /// `(noisy, clean)` NCHW tensors for the given sample indices.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let shape = [indices.len(), self.channels, self.size, self.size];
        let gather = |src: &[Vec<f64>]| {
            indices
                .iter()
                .flat_map(|&i| src[i].iter().copied())
                .collect::<Vec<_>>()
        };
        (
            Tensor::new(&shape, gather(&self.noisy)).expect("batch geometry"),
            Tensor::new(&shape, gather(&self.clean)).expect("batch geometry"),
        )
    }
}
