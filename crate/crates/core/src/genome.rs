//! Variable-length chromosome encoding of a sequential denoising network.
//!
//! A chromosome is a list of block genes followed by a tail gene. Each block
//! decodes to `Conv(valid) -> [ReflectPad] -> BatchNorm -> ReLU`; the tail is
//! a single convolution back to the input channel count.

use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{gaussian_init, BatchNorm, Conv2d, Layer, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGene {
    pub kernel_size: usize,
    pub feature_maps: usize,
    pub weight_mean: f64,
    pub weight_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailGene {
    pub weight_mean: f64,
    pub weight_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub blocks: Vec<BlockGene>,
    pub tail: TailGene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingConfig {
    pub min_blocks: usize,
    pub max_blocks: usize,
    pub kernel_sizes: Vec<usize>,
    pub min_feature_maps: usize,
    pub max_feature_maps: usize,
    pub mean_range: (f64, f64),
    pub std_range: (f64, f64),
    pub tail_kernel_size: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            min_blocks: 4,
            max_blocks: 8,
            kernel_sizes: vec![1, 3],
            min_feature_maps: 128,
            max_feature_maps: 512,
            mean_range: (-0.8, 0.8),
            std_range: (0.0, 0.5),
            tail_kernel_size: 3,
        }
    }
}

impl EncodingConfig {
    /// Reduced sizes for laptop-scale runs.
    pub fn desk() -> Self {
        EncodingConfig {
            min_blocks: 2,
            max_blocks: 4,
            min_feature_maps: 8,
            max_feature_maps: 32,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.min_blocks < 1 || self.min_blocks > self.max_blocks {
            problems.push(format!(
                "block bounds [{}, {}] invalid",
                self.min_blocks, self.max_blocks
            ));
        }
        if self.min_feature_maps < 1 || self.min_feature_maps > self.max_feature_maps {
            problems.push(format!(
                "feature map bounds [{}, {}] invalid",
                self.min_feature_maps, self.max_feature_maps
            ));
        }
        if self.kernel_sizes.is_empty() || self.kernel_sizes.iter().any(|k| k.is_multiple_of(2)) {
            problems.push(format!("kernel sizes {:?} must be non-empty and odd", self.kernel_sizes));
        }
        if self.tail_kernel_size.is_multiple_of(2) {
            problems.push(format!("tail kernel size {} must be odd", self.tail_kernel_size));
        }
        let (mlo, mhi) = self.mean_range;
        let (slo, shi) = self.std_range;
        if !(mlo <= mhi) {
            problems.push(format!("mean range ({mlo}, {mhi}) invalid"));
        }
        if !(slo >= 0.0 && slo <= shi) {
            problems.push(format!("std range ({slo}, {shi}) invalid"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    pub fn max_kernel_size(&self) -> usize {
        self.kernel_sizes
            .iter()
            .copied()
            .chain([self.tail_kernel_size])
            .max()
            .unwrap_or(1)
    }

    pub fn random_block<R: Rng + ?Sized>(&self, rng: &mut R) -> BlockGene {
        BlockGene {
            kernel_size: *self.kernel_sizes.choose(rng).expect("non-empty kernel set"),
            feature_maps: rng.random_range(self.min_feature_maps..=self.max_feature_maps),
            weight_mean: uniform(rng, self.mean_range),
            weight_std: uniform(rng, self.std_range),
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// A single invariant violation reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn random_chromosome<R: Rng + ?Sized>(cfg: &EncodingConfig, rng: &mut R) -> Chromosome {
    let depth = rng.random_range(cfg.min_blocks..=cfg.max_blocks);
    let blocks = (0..depth).map(|_| cfg.random_block(rng)).collect();
    let tail = TailGene {
        weight_mean: uniform(rng, cfg.mean_range),
        weight_std: uniform(rng, cfg.std_range),
    };
    Chromosome { blocks, tail }
}

fn in_range(x: f64, (lo, hi): (f64, f64)) -> bool {
    x.is_finite() && lo <= x && x <= hi
}

/// Checks every encoding invariant and reports all violations.
pub fn validate(c: &Chromosome, cfg: &EncodingConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = c.blocks.len();
    if n < cfg.min_blocks {
        out.push(format!("block count below N_min ({n} < {})", cfg.min_blocks));
    }
    if n > cfg.max_blocks {
        out.push(format!("block count above N_max ({n} > {})", cfg.max_blocks));
    }
    for (i, b) in c.blocks.iter().enumerate() {
        if b.kernel_size % 2 == 0 || !cfg.kernel_sizes.contains(&b.kernel_size) {
            out.push(format!(
                "block {i}: kernel size not odd/allowed ({})",
                b.kernel_size
            ));
        }
        if b.feature_maps < cfg.min_feature_maps || b.feature_maps > cfg.max_feature_maps {
            out.push(format!(
                "block {i}: feature maps {} outside [{}, {}]",
                b.feature_maps, cfg.min_feature_maps, cfg.max_feature_maps
            ));
        }
        if !in_range(b.weight_mean, cfg.mean_range) {
            out.push(format!("block {i}: weight mean {} out of range", b.weight_mean));
        }
        if !in_range(b.weight_std, cfg.std_range) {
            out.push(format!("block {i}: weight std {} out of range", b.weight_std));
        }
    }
    if !in_range(c.tail.weight_mean, cfg.mean_range) {
        out.push(format!("tail: weight mean {} out of range", c.tail.weight_mean));
    }
    if !in_range(c.tail.weight_std, cfg.std_range) {
        out.push(format!("tail: weight std {} out of range", c.tail.weight_std));
    }
    out.into_iter().map(Violation).collect()
}

fn ensure_valid(c: &Chromosome, cfg: &EncodingConfig) -> Result<()> {
    let v = validate(c, cfg);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidChromosome(v.into_iter().map(|v| v.0).collect()))
    }
}

/// Layer description produced by [`decode`], before weights are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        weight_mean: f64,
        weight_std: f64,
    },
    ReflectPad(usize),
    BatchNorm(usize),
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Materializes the network, drawing conv weights from their gene's
    /// Gaussian in layer order.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Network> {
        let layers = self
            .layers
            .iter()
            .map(|spec| {
                Ok(match *spec {
                    LayerSpec::Conv {
                        in_channels,
                        out_channels,
                        kernel_size: k,
                        weight_mean,
                        weight_std,
                    } => {
                        let w = gaussian_init(
                            &[out_channels, in_channels, k, k],
                            weight_mean,
                            weight_std,
                            rng,
                        )?;
                        Layer::ConvValid(Conv2d::new(w)?)
                    }
                    LayerSpec::ReflectPad(pad) => Layer::ReflectPad { pad },
                    LayerSpec::BatchNorm(c) => Layer::BatchNorm(BatchNorm::new(c)),
                    LayerSpec::Relu => Layer::relu(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers)
    }
}

fn push_conv(layers: &mut Vec<LayerSpec>, cin: usize, cout: usize, k: usize, mean: f64, std: f64) {
    layers.push(LayerSpec::Conv {
        in_channels: cin,
        out_channels: cout,
        kernel_size: k,
        weight_mean: mean,
        weight_std: std,
    });
    if k != 1 {
        layers.push(LayerSpec::ReflectPad((k - 1) / 2));
    }
}

pub fn decode(c: &Chromosome, in_channels: usize, cfg: &EncodingConfig) -> Result<NetworkSpec> {
    ensure_valid(c, cfg)?;
    if in_channels == 0 {
        return Err(Error::InvalidParameter("input channel count must be >= 1".into()));
    }
    let mut layers = Vec::with_capacity(4 * c.blocks.len() + 2);
    let mut channels = in_channels;
    for b in &c.blocks {
        push_conv(&mut layers, channels, b.feature_maps, b.kernel_size, b.weight_mean, b.weight_std);
        layers.push(LayerSpec::BatchNorm(b.feature_maps));
        layers.push(LayerSpec::Relu);
        channels = b.feature_maps;
    }
    push_conv(
        &mut layers,
        channels,
        in_channels,
        cfg.tail_kernel_size,
        c.tail.weight_mean,
        c.tail.weight_std,
    );
    Ok(NetworkSpec { layers })
}

/// Trainable parameter count of the decoded network: conv weights and
/// biases plus BN gamma and beta.
pub fn param_count(c: &Chromosome, in_channels: usize, cfg: &EncodingConfig) -> usize {
    let conv = |k: usize, cin: usize, f: usize| k * k * cin * f + f;
    let mut total = 0;
    let mut channels = in_channels;
    for b in &c.blocks {
        total += conv(b.kernel_size, channels, b.feature_maps) + 2 * b.feature_maps;
        channels = b.feature_maps;
    }
    total + conv(cfg.tail_kernel_size, channels, in_channels)
}

impl Chromosome {
    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    /// Canonical JSON text of the genes alone.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("chromosome serializes")
    }

    /// Hex SHA-256 of [`Chromosome::canonical_json`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// On-disk genome document: genes plus the encoding they were drawn under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeFile {
    pub blocks: Vec<BlockGene>,
    pub tail: TailGene,
    pub encoding: EncodingConfig,
    /// Band count of the data the genome was evolved on, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_channels: Option<usize>,
}

impl GenomeFile {
    pub fn new(c: &Chromosome, encoding: &EncodingConfig) -> Self {
        GenomeFile {
            blocks: c.blocks.clone(),
            tail: c.tail.clone(),
            encoding: encoding.clone(),
            in_channels: None,
        }
    }

    pub fn with_channels(mut self, channels: usize) -> Self {
        self.in_channels = Some(channels);
        self
    }

    pub fn chromosome(&self) -> Chromosome {
        Chromosome {
            blocks: self.blocks.clone(),
            tail: self.tail.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("genome serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
