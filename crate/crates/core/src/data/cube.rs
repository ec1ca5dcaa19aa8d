//! The [`HsiCube`] type and its `HSC1` file format.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "HSC1"
//! 4       4           height  (u32 LE)
//! 8       4           width   (u32 LE)
//! 12      4           bands   (u32 LE)
//! 16      4*H*W*C     samples, f32 LE, row-major H, W, C
//! ...     4           value range lo (f32 LE)
//! ...     4           value range hi (f32 LE)
//! ...     4           CRC-32 (IEEE) of the sample bytes (u32 LE)
//! ```

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HSC1";
const HEADER_LEN: usize = 16;
const FOOTER_LEN: usize = 12;

/// An `H x W x C` image cube stored row-major with bands innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    value_range: (f64, f64),
}

impl HsiCube {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
        value_range: (f64, f64),
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidShape(format!(
                "cube dims must be >= 1, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidShape(format!(
                "cube {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("cube data must be finite".into()));
        }
        Ok(HsiCube {
            height,
            width,
            channels,
            data,
            value_range,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.value_range
    }

    pub fn peak(&self) -> f64 {
        self.value_range.1 - self.value_range.0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + band]
    }

    /// One band as an `H x W` row-major plane.
    pub fn band(&self, band: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(band)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Reorders bands so that new band `i` is old band `order[i]`.
    pub fn permute_bands(&self, order: &[usize]) -> Result<Self> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.channels).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(format!("{order:?} is not a band permutation")));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for px in self.data.chunks_exact(self.channels) {
            data.extend(order.iter().map(|&b| px[b]));
        }
        HsiCube::new(self.height, self.width, self.channels, data, self.value_range)
    }

    pub fn same_shape(&self, other: &HsiCube) -> bool {
        self.dims() == other.dims()
    }

    /// HSC1 bytes of this cube (samples narrowed to `f32`).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len() + FOOTER_LEN);
        out.extend_from_slice(MAGIC);
        for d in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        let crc = crc32fast::hash(&out[HEADER_LEN..]);
        out.extend_from_slice(&(self.value_range.0 as f32).to_le_bytes());
        out.extend_from_slice(&(self.value_range.1 as f32).to_le_bytes());
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(
                bytes.len(),
                format!(
                    "truncated header: missing {} bytes",
                    HEADER_LEN - bytes.len()
                ),
            ));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::format(0, format!("bad magic {:?}", &bytes[..4])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (h, w, c) = (u32_at(4), u32_at(8), u32_at(12));
        for (i, d) in [h, w, c].into_iter().enumerate() {
            if d == 0 {
                return Err(Error::format(4 + 4 * i, "zero dimension"));
            }
        }
        let count = h
            .checked_mul(w)
            .and_then(|x| x.checked_mul(c))
            .ok_or_else(|| Error::format(4, "dimension product overflows"))?;
        let payload = count * 4;
        let expected = HEADER_LEN + payload + FOOTER_LEN;
        if bytes.len() < expected {
            return Err(Error::format(
                bytes.len(),
                format!(
                    "truncated file: {h}x{w}x{c} needs {expected} bytes, missing {}",
                    expected - bytes.len()
                ),
            ));
        }
        if bytes.len() > expected {
            return Err(Error::format(
                expected,
                format!(
                    "header dims {h}x{w}x{c} do not match payload: {} unexpected trailing bytes",
                    bytes.len() - expected
                ),
            ));
        }
        let samples = &bytes[HEADER_LEN..HEADER_LEN + payload];
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
        let footer = HEADER_LEN + payload;
        let crc = u32_at(footer + 8) as u32;
        if crc32fast::hash(samples) != crc {
            return Err(Error::format(footer + 8, "payload CRC mismatch"));
        }
        let data: Vec<f64> = samples
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(HEADER_LEN + 4 * i, "non-finite sample"));
        }
        HsiCube::new(h, w, c, data, (f32_at(footer), f32_at(footer + 4)))
    }
}

pub fn save_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    fs::write(path, cube.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_cube(path: &Path) -> Result<HsiCube> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    HsiCube::from_bytes(&bytes)
}

/// Components summed by [`synth_cube`].
pub const SYNTH_COMPONENTS: usize = 4;

/// Smooth synthetic cube: a sum of separable spatial-field x spectral
/// signature components, rescaled to `[0, 1]`.
pub fn synth_cube<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    bands: usize,
    rng: &mut R,
) -> Result<HsiCube> {
    if height == 0 || width == 0 || bands == 0 {
        return Err(Error::InvalidShape(format!(
            "cube dims must be >= 1, got {height}x{width}x{bands}"
        )));
    }
    let mut data = vec![0.0; height * width * bands];
    for _ in 0..SYNTH_COMPONENTS {
        let waves: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.5..1.0),
                    rng.random_range(0.0..2.5),
                    rng.random_range(0.0..2.5),
                    rng.random_range(0.0..TAU),
                )
            })
            .collect();
        let signature: Vec<f64> = {
            let base: f64 = rng.random_range(0.5..1.5);
            let amp: f64 = rng.random_range(0.1..0.5);
            let freq: f64 = rng.random_range(0.0..0.75);
            let phase: f64 = rng.random_range(0.0..TAU);
            (0..bands)
                .map(|b| base + amp * (TAU * freq * b as f64 / bands as f64 + phase).cos())
                .collect()
        };
        for y in 0..height {
            for x in 0..width {
                let field: f64 = waves
                    .iter()
                    .map(|&(a, u, v, p)| {
                        a * (TAU * (u * x as f64 / width as f64 + v * y as f64 / height as f64) + p)
                            .cos()
                    })
                    .sum();
                let px = &mut data[(y * width + x) * bands..][..bands];
                for (d, s) in px.iter_mut().zip(&signature) {
                    *d += field * s;
                }
            }
        }
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for v in &mut data {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.5 };
    }
    HsiCube::new(height, width, bands, data, (0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Gaussian standard deviation in the cube's value units.
    pub sigma: f64,
}

/// Adds independent `Normal(0, sigma^2)` noise to every sample, unclipped.
pub fn add_gaussian_noise<R: Rng + ?Sized>(
    cube: &HsiCube,
    cfg: &NoiseConfig,
    rng: &mut R,
) -> Result<HsiCube> {
    if !(cfg.sigma >= 0.0) || !cfg.sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be finite and >= 0, got {}",
            cfg.sigma
        )));
    }
    let mut out = cube.clone();
    if cfg.sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.sigma).expect("validated sigma");
        out.data.iter_mut().for_each(|v| *v += normal.sample(rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn random_cube(seed: u64, h: usize, w: usize, c: usize) -> HsiCube {
        let mut rng = rng_from_seed(seed);
        let data = (0..h * w * c).map(|_| rng.random_range(-2.0f32..3.0) as f64).collect();
        HsiCube::new(h, w, c, data, (-2.0, 3.0)).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        for seed in 0..10 {
            let cube = random_cube(seed, 3 + seed as usize, 5, 1 + seed as usize % 4);
            assert_eq!(HsiCube::from_bytes(&cube.to_bytes()).unwrap(), cube);
        }
    }

    #[test]
    fn truncation_names_missing_bytes() {
        let bytes = random_cube(1, 4, 4, 2).to_bytes();
        let err = HsiCube::from_bytes(&bytes[..bytes.len() - 10]).unwrap_err();
        assert!(err.to_string().contains("missing 10"), "{err}");
        let err = HsiCube::from_bytes(&bytes[..6]).unwrap_err();
        assert!(err.to_string().contains("missing 10"), "{err}");
    }

    #[test]
    fn dims_mismatch_and_magic() {
        let mut bytes = random_cube(2, 4, 4, 2).to_bytes();
        bytes[12] = 1; // claim one band
        assert!(matches!(HsiCube::from_bytes(&bytes), Err(Error::Format { offset: 92, .. })));
        let mut bytes = random_cube(2, 4, 4, 2).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(HsiCube::from_bytes(&bytes), Err(Error::Format { offset: 0, .. })));
        let mut bytes = random_cube(2, 4, 4, 2).to_bytes();
        bytes[20] ^= 1;
        assert!(HsiCube::from_bytes(&bytes).unwrap_err().to_string().contains("CRC"));
    }

    #[test]
    fn synth_is_bounded_and_seeded() {
        let a = synth_cube(20, 17, 6, &mut rng_from_seed(3)).unwrap();
        let b = synth_cube(20, 17, 6, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.value_range(), (0.0, 1.0));
    }

    #[test]
    fn zero_sigma_is_identity() {
        let cube = random_cube(5, 6, 6, 3);
        let out = add_gaussian_noise(&cube, &NoiseConfig { sigma: 0.0 }, &mut rng_from_seed(0)).unwrap();
        assert_eq!(out, cube);
        assert!(add_gaussian_noise(&cube, &NoiseConfig { sigma: -1.0 }, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn permute_bands_rejects_non_permutations() {
        let cube = random_cube(5, 2, 2, 3);
        assert!(cube.permute_bands(&[0, 0, 1]).is_err());
        let p = cube.permute_bands(&[2, 0, 1]).unwrap();
        assert_eq!(p.get(1, 1, 0), cube.get(1, 1, 2));
    }
}
