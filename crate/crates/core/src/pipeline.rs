//! Data preparation shared by the command-line tools and end-to-end tests:
//! noise injection, patch extraction and the train/eval/test split.

use serde::{Deserialize, Serialize};

use crate::data::{add_gaussian_noise, extract_patches, split_patches, HsiCube, NoiseConfig, PatchSet};
use crate::engine::Dataset;
use crate::error::Result;
use crate::metrics::mpsnr;
use crate::nn::{Mode, Network};
use crate::rng::{derived_rng, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub patch_size: usize,
    pub stride: usize,
    /// (train, eval, test) fractions.
    pub split: (f64, f64, f64),
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            patch_size: 30,
            stride: 10,
            split: (0.665, 0.152, 0.183),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub noisy: HsiCube,
    pub train: PatchSet,
    pub eval: PatchSet,
    pub test: PatchSet,
}

impl Splits {
    pub fn train_set(&self) -> Dataset {
        Dataset::from_patches(&self.train)
    }

    pub fn eval_set(&self) -> Dataset {
        Dataset::from_patches(&self.eval)
    }

    /// Training and evaluation patches together, for final training.
    pub fn combined_set(&self) -> Result<Dataset> {
        self.train_set().concat(&self.eval_set())
    }
}

/// Deterministic in `seed`: the noise and the split use separate streams.
pub fn prepare_splits(clean: &HsiCube, noise: &NoiseConfig, patches: &PatchConfig, seed: u64) -> Result<Splits> {
    let noisy = add_gaussian_noise(clean, noise, &mut derived_rng(seed, &[stream::NOISE]))?;
    let all = extract_patches(clean, &noisy, patches.patch_size, patches.stride)?;
    let (train, eval, test) = split_patches(&all, patches.split, &mut derived_rng(seed, &[stream::SPLIT]))?;
    Ok(Splits {
        noisy,
        train,
        eval,
        test,
    })
}

/// Mean over patches of per-patch MPSNR, for the noisy inputs and for the
/// model's outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchScores {
    pub noisy_mpsnr: f64,
    pub denoised_mpsnr: f64,
    pub gain_db: f64,
}

pub fn score_patches(model: &Network, set: &PatchSet) -> Result<PatchScores> {
    let data = Dataset::from_patches(set);
    let mut net = model.clone();
    net.set_mode(Mode::Eval);
    let (s, c) = (set.size, set.channels);
    let mut noisy_sum = 0.0;
    let mut denoised_sum = 0.0;
    for i in 0..set.len() {
        let (x, _) = data.batch(&[i]);
        let out = net.forward(&x)?;
        let hwc = crate::engine::dataset::chw_to_hwc(out.data(), s, s, c);
        let clean = set.clean_cube(i);
        noisy_sum += mpsnr(&clean, &set.noisy_cube(i))?;
        denoised_sum += mpsnr(&clean, &set.cube_of(&hwc))?;
    }
    let n = set.len().max(1) as f64;
    let (noisy_mpsnr, denoised_mpsnr) = (noisy_sum / n, denoised_sum / n);
    Ok(PatchScores {
        noisy_mpsnr,
        denoised_mpsnr,
        gain_db: denoised_mpsnr - noisy_mpsnr,
    })
}
