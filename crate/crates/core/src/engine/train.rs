//! One-epoch fitness training and early-stopped final training.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::config::EvolutionConfig;
use crate::error::{Error, Result};
use crate::genome::{decode, param_count, Chromosome};
use crate::nn::ops::mse_loss;
use crate::nn::{AdamConfig, Mode, Network};
use crate::rng::{derive_seed, derived_rng, rng_from_seed, stream};
use crate::selection::FitnessRecord;

/// Runs one pass over `order` in mini-batches, returning the mean
/// per-element training loss.
pub fn train_epoch(
    net: &mut Network,
    data: &Dataset,
    order: &[usize],
    batch_size: usize,
    lr: f64,
    adam: &AdamConfig,
) -> Result<f64> {
    net.set_mode(Mode::Train);
    let mut total = 0.0;
    let mut count = 0usize;
    for (step, chunk) in order.chunks(batch_size.max(1)).enumerate() {
        let (noisy, clean) = data.batch(chunk);
        let out = net.forward(&noisy)?;
        let (loss, grad) = mse_loss(&out, &clean)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!("loss {loss} at batch {step}")));
        }
        net.zero_grad();
        net.backward(&grad)?;
        net.adam_step(lr, adam);
        if !net.params_finite() {
            return Err(Error::NonFiniteLoss(format!("parameters non-finite after batch {step}")));
        }
        total += loss * clean.len() as f64;
        count += clean.len();
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Eval-mode mean squared error over `indices` (all samples if `None`).
pub fn eval_mse(
    net: &mut Network,
    data: &Dataset,
    indices: Option<&[usize]>,
    batch_size: usize,
) -> Result<f64> {
    let all: Vec<usize>;
    let idx = match indices {
        Some(i) => i,
        None => {
            all = (0..data.len()).collect();
            &all
        }
    };
    let mode = net.mode();
    net.set_mode(Mode::Eval);
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (noisy, clean) = data.batch(chunk);
        let out = net.forward(&noisy)?;
        let (loss, _) = mse_loss(&out, &clean)?;
        total += loss * clean.len() as f64;
        count += clean.len();
    }
    net.set_mode(mode);
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Decodes `c` with weights drawn from `weight_seed`, trains it for
/// `eval_epochs` over the unshuffled training set and scores it on the
/// evaluation set. Divergence yields an infinite-MSE record.
pub fn evaluate_fitness(
    c: &Chromosome,
    train: &Dataset,
    eval: &Dataset,
    cfg: &EvolutionConfig,
    weight_seed: u64,
) -> Result<FitnessRecord> {
    if train.is_empty() || eval.is_empty() {
        return Err(Error::InvalidParameter("training and evaluation sets must be non-empty".into()));
    }
    let channels = train.channels;
    let complexity = param_count(c, channels, &cfg.encoding);
    let mut net = decode(c, channels, &cfg.encoding)?.build(&mut rng_from_seed(weight_seed))?;
    let order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.eval_epochs {
        match train_epoch(&mut net, train, &order, cfg.batch_size, cfg.eval_lr, &cfg.adam) {
            Ok(_) => {}
            Err(Error::NonFiniteLoss(why)) => {
                log::debug!("individual diverged: {why}");
                return Ok(FitnessRecord::diverged(complexity));
            }
            Err(e) => return Err(e),
        }
    }
    let mse = eval_mse(&mut net, eval, None, cfg.batch_size)?;
    Ok(if mse.is_finite() {
        FitnessRecord { mse, complexity }
    } else {
        FitnessRecord::diverged(complexity)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub heldout_mse: f64,
}

#[derive(Debug, Clone)]
pub struct FinalTraining {
    /// Parameters from the epoch with the lowest held-out MSE, in Eval mode.
    pub network: Network,
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl FinalTraining {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,heldout_mse\n");
        for e in &self.curve {
            s.push_str(&format!("{},{},{}\n", e.epoch, e.train_mse, e.heldout_mse));
        }
        s
    }
}

/// Trains a freshly initialized network for `c` on `combined`, shuffling
/// each epoch and stopping after `final_patience` epochs without held-out
/// improvement.
pub fn final_train(
    c: &Chromosome,
    combined: &Dataset,
    cfg: &EvolutionConfig,
    seed: u64,
) -> Result<FinalTraining> {
    let net = decode(c, combined.channels, &cfg.encoding)?
        .build(&mut rng_from_seed(derive_seed(seed, &[stream::FINAL, stream::WEIGHTS])))?;
    train_network(net, combined, cfg, seed)
}

/// Early-stopped training loop shared by [`final_train`] and tests that
/// construct networks by hand.
pub fn train_network(
    mut net: Network,
    combined: &Dataset,
    cfg: &EvolutionConfig,
    seed: u64,
) -> Result<FinalTraining> {
    if combined.len() < 2 {
        return Err(Error::InvalidParameter(
            "final training needs at least 2 samples".into(),
        ));
    }
    let mut rng = derived_rng(seed, &[stream::FINAL]);
    let mut order: Vec<usize> = (0..combined.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = ((cfg.holdout_fraction * combined.len() as f64).round() as usize)
        .clamp(1, combined.len() - 1);
    let (holdout, rest) = order.split_at(n_hold);
    let holdout = holdout.to_vec();
    let mut train_idx = rest.to_vec();

    let mut curve = Vec::new();
    let mut best: Option<(f64, usize, Network)> = None;
    let mut stall = 0;
    for epoch in 1..=cfg.final_max_epochs {
        train_idx.shuffle(&mut rng);
        let train_mse = train_epoch(&mut net, combined, &train_idx, cfg.batch_size, cfg.final_lr, &cfg.adam)
            .map_err(|e| match e {
                Error::NonFiniteLoss(why) => Error::NonFiniteLoss(format!("final training epoch {epoch}: {why}")),
                other => other,
            })?;
        let heldout_mse = eval_mse(&mut net, combined, Some(&holdout), cfg.batch_size)?;
        if !heldout_mse.is_finite() {
            return Err(Error::NonFiniteLoss(format!(
                "final training epoch {epoch}: held-out MSE {heldout_mse}"
            )));
        }
        curve.push(EpochStats {
            epoch,
            train_mse,
            heldout_mse,
        });
        log::debug!("epoch {epoch}: train {train_mse:.6e}, held-out {heldout_mse:.6e}");
        match &best {
            Some((b, _, _)) if heldout_mse >= *b => {
                stall += 1;
                if stall >= cfg.final_patience {
                    break;
                }
            }
            _ => {
                best = Some((heldout_mse, epoch, net.clone()));
                stall = 0;
            }
        }
    }
    let (_, best_epoch, mut network) = best.expect("at least one epoch ran");
    network.set_mode(Mode::Eval);
    Ok(FinalTraining {
        network,
        curve,
        best_epoch,
    })
}
