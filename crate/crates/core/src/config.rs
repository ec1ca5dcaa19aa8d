//! Evolution and training hyper-parameters with the two built-in profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::EncodingConfig;
use crate::nn::AdamConfig;
use crate::selection::SelectionConfig;
use crate::variation::VariationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub eval_lr: f64,
    pub eval_epochs: usize,
    pub final_lr: f64,
    pub batch_size: usize,
    /// Epochs without held-out improvement before final training stops.
    pub final_patience: usize,
    /// Hard cap on final training epochs.
    pub final_max_epochs: usize,
    /// Share of the combined set held out for early stopping.
    pub holdout_fraction: f64,
    pub adam: AdamConfig,
    pub encoding: EncodingConfig,
    pub variation: VariationConfig,
    pub selection: SelectionConfig,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl EvolutionConfig {
    /// Published-scale settings: 30 individuals, 10 generations, depth 4-8,
    /// 128-512 feature maps.
    pub fn paper() -> Self {
        EvolutionConfig {
            population_size: 30,
            generations: 10,
            eval_lr: 0.004,
            eval_epochs: 1,
            final_lr: 0.001,
            batch_size: 100,
            final_patience: 5,
            final_max_epochs: 1000,
            holdout_fraction: 0.1,
            adam: AdamConfig::default(),
            encoding: EncodingConfig::default(),
            variation: VariationConfig::default(),
            selection: SelectionConfig::default(),
        }
    }

    /// Laptop-scale settings: 8 individuals, 5 generations, depth 2-4,
    /// 8-32 feature maps.
    pub fn desk() -> Self {
        EvolutionConfig {
            population_size: 8,
            generations: 5,
            eval_epochs: 5,
            final_lr: 0.004,
            batch_size: 2,
            final_patience: 100,
            final_max_epochs: 3000,
            encoding: EncodingConfig::desk(),
            ..Self::paper()
        }
    }

    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.population_size < 2 {
            return bad(format!("population size {} < 2", self.population_size));
        }
        if self.generations < 1 || self.eval_epochs < 1 || self.batch_size < 1 {
            return bad("generations, eval_epochs and batch_size must be >= 1".into());
        }
        if self.final_patience < 1 || self.final_max_epochs < 1 {
            return bad("final_patience and final_max_epochs must be >= 1".into());
        }
        if !(self.eval_lr > 0.0 && self.final_lr > 0.0) {
            return bad("learning rates must be > 0".into());
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad(format!("holdout fraction {} outside (0, 1)", self.holdout_fraction));
        }
        self.encoding.check()?;
        self.variation.check()?;
        self.selection.check()
    }
}
