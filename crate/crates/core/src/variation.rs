//! Variation operators: population initialization, simulated binary
//! crossover, bounded polynomial mutation, block-aligned chromosome
//! crossover and depth mutation.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{random_chromosome, BlockGene, Chromosome, EncodingConfig};
use crate::selection::{slack_binary_tournament, FitnessRecord, SelectionConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationConfig {
    pub eta_c: f64,
    pub eta_m: f64,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub kernel_swap_prob: f64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            eta_c: 1.0,
            eta_m: 1.0,
            p_crossover: 0.9,
            p_mutation: 0.2,
            kernel_swap_prob: 0.5,
        }
    }
}

impl VariationConfig {
    pub fn check(&self) -> Result<()> {
        let probs = [self.p_crossover, self.p_mutation, self.kernel_swap_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(format!(
                "variation probabilities {probs:?} must lie in [0, 1]"
            )));
        }
        if !(self.eta_c > 0.0 && self.eta_m > 0.0) {
            return Err(Error::InvalidParameter(
                "distribution indices must be > 0".into(),
            ));
        }
        Ok(())
    }
}

pub fn init_population<R: Rng + ?Sized>(
    n: usize,
    cfg: &EncodingConfig,
    rng: &mut R,
) -> Vec<Chromosome> {
    (0..n).map(|_| random_chromosome(cfg, rng)).collect()
}

/// SBX spread factor for the uniform draw `u`.
pub fn sbx_spread(u: f64, eta: f64) -> f64 {
    let e = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(e)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(e)
    }
}

/// Unclamped SBX children for spread `beta`.
pub fn sbx_children(x1: f64, x2: f64, beta: f64) -> (f64, f64) {
    // 0.5[(1 +/- beta) x1 + (1 -/+ beta) x2], written around the midpoint so
    // equal parents reproduce exactly.
    let mid = 0.5 * (x1 + x2);
    let half_spread = 0.5 * beta * (x2 - x1);
    (mid - half_spread, mid + half_spread)
}

pub fn sbx_pair<R: Rng + ?Sized>(
    x1: f64,
    x2: f64,
    eta_c: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if !(lo <= hi) {
        return Err(Error::InvalidBounds { lo, hi });
    }
    let u: f64 = rng.random();
    let (c1, c2) = sbx_children(x1, x2, sbx_spread(u, eta_c));
    Ok((c1.clamp(lo, hi), c2.clamp(lo, hi)))
}

/// Bounded polynomial mutation step (as a fraction of `hi - lo`) for draw `u`.
pub fn pm_delta(x: f64, u: f64, eta: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    let d1 = (x - lo) / span;
    let d2 = (hi - x) / span;
    let e = eta + 1.0;
    if u < 0.5 {
        (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(e)).powf(1.0 / e) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(e)).powf(1.0 / e)
    }
}

pub fn polynomial_mutate<R: Rng + ?Sized>(
    x: f64,
    eta_m: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidBounds { lo, hi });
    }
    let u: f64 = rng.random();
    Ok((x + pm_delta(x, u, eta_m, lo, hi) * (hi - lo)).clamp(lo, hi))
}

fn round_maps(x: f64, cfg: &EncodingConfig) -> usize {
    (x.round().max(0.0) as usize).clamp(cfg.min_feature_maps, cfg.max_feature_maps)
}

fn cross_weights<R: Rng + ?Sized>(
    a: (&mut f64, &mut f64),
    b: (&mut f64, &mut f64),
    vcfg: &VariationConfig,
    ecfg: &EncodingConfig,
    rng: &mut R,
) -> Result<()> {
    let (mlo, mhi) = ecfg.mean_range;
    let (slo, shi) = ecfg.std_range;
    let (m1, m2) = sbx_pair(*a.0, *b.0, vcfg.eta_c, mlo, mhi, rng)?;
    let (s1, s2) = sbx_pair(*a.1, *b.1, vcfg.eta_c, slo, shi, rng)?;
    (*a.0, *b.0, *a.1, *b.1) = (m1, m2, s1, s2);
    Ok(())
}

/// Positional crossover of two chromosomes.
///
/// Matched blocks cross their weight genes and feature maps by SBX and swap
/// kernel sizes with `kernel_swap_prob`. With equal lengths the tails cross;
/// otherwise the shorter parent's tail crosses the weight genes of the
/// longer parent's block at the same position, and the longer parent's
/// remaining genes pass through unchanged.
pub fn crossover_chromosomes<R: Rng + ?Sized>(
    p1: &Chromosome,
    p2: &Chromosome,
    vcfg: &VariationConfig,
    ecfg: &EncodingConfig,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome)> {
    let mut o1 = p1.clone();
    let mut o2 = p2.clone();
    let shared = o1.blocks.len().min(o2.blocks.len());
    let (flo, fhi) = (ecfg.min_feature_maps as f64, ecfg.max_feature_maps as f64);
    for (b1, b2) in o1.blocks.iter_mut().zip(o2.blocks.iter_mut()) {
        cross_weights(
            (&mut b1.weight_mean, &mut b1.weight_std),
            (&mut b2.weight_mean, &mut b2.weight_std),
            vcfg,
            ecfg,
            rng,
        )?;
        let (f1, f2) = sbx_pair(b1.feature_maps as f64, b2.feature_maps as f64, vcfg.eta_c, flo, fhi, rng)?;
        b1.feature_maps = round_maps(f1, ecfg);
        b2.feature_maps = round_maps(f2, ecfg);
        if rng.random::<f64>() < vcfg.kernel_swap_prob {
            std::mem::swap(&mut b1.kernel_size, &mut b2.kernel_size);
        }
    }
    match o1.blocks.len().cmp(&o2.blocks.len()) {
        std::cmp::Ordering::Equal => {
            let (t1, t2) = (&mut o1.tail, &mut o2.tail);
            cross_weights(
                (&mut t1.weight_mean, &mut t1.weight_std),
                (&mut t2.weight_mean, &mut t2.weight_std),
                vcfg,
                ecfg,
                rng,
            )?;
        }
        std::cmp::Ordering::Less => {
            let (t, b) = (&mut o1.tail, &mut o2.blocks[shared]);
            cross_weights(
                (&mut t.weight_mean, &mut t.weight_std),
                (&mut b.weight_mean, &mut b.weight_std),
                vcfg,
                ecfg,
                rng,
            )?;
        }
        std::cmp::Ordering::Greater => {
            let (b, t) = (&mut o1.blocks[shared], &mut o2.tail);
            cross_weights(
                (&mut b.weight_mean, &mut b.weight_std),
                (&mut t.weight_mean, &mut t.weight_std),
                vcfg,
                ecfg,
                rng,
            )?;
        }
    }
    Ok((o1, o2))
}

/// Structural outcome of the depth step of [`mutate_chromosome`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthMutation {
    Add,
    Remove,
    Keep,
}

fn maybe_pm<R: Rng + ?Sized>(
    x: &mut f64,
    (lo, hi): (f64, f64),
    p: f64,
    eta: f64,
    rng: &mut R,
) -> Result<()> {
    if rng.random::<f64>() < p && lo < hi {
        *x = polynomial_mutate(*x, eta, lo, hi, rng)?;
    }
    Ok(())
}

fn mutate_block<R: Rng + ?Sized>(
    b: &mut BlockGene,
    p: f64,
    vcfg: &VariationConfig,
    ecfg: &EncodingConfig,
    rng: &mut R,
) -> Result<()> {
    maybe_pm(&mut b.weight_mean, ecfg.mean_range, p, vcfg.eta_m, rng)?;
    maybe_pm(&mut b.weight_std, ecfg.std_range, p, vcfg.eta_m, rng)?;
    let mut maps = b.feature_maps as f64;
    let bounds = (ecfg.min_feature_maps as f64, ecfg.max_feature_maps as f64);
    maybe_pm(&mut maps, bounds, p, vcfg.eta_m, rng)?;
    b.feature_maps = round_maps(maps, ecfg);
    if rng.random::<f64>() < p {
        b.kernel_size = *ecfg.kernel_sizes.choose(rng).expect("non-empty kernel set");
    }
    Ok(())
}

/// Gene-level polynomial mutation followed by a depth step; returns the
/// mutated chromosome and which depth operation was applied.
pub fn mutate_chromosome_traced<R: Rng + ?Sized>(
    c: &Chromosome,
    vcfg: &VariationConfig,
    ecfg: &EncodingConfig,
    rng: &mut R,
) -> Result<(Chromosome, DepthMutation)> {
    let mut out = c.clone();
    let real_genes = 3 * out.blocks.len() + 2;
    let p = 1.0 / real_genes as f64;
    for b in &mut out.blocks {
        mutate_block(b, p, vcfg, ecfg, rng)?;
    }
    maybe_pm(&mut out.tail.weight_mean, ecfg.mean_range, p, vcfg.eta_m, rng)?;
    maybe_pm(&mut out.tail.weight_std, ecfg.std_range, p, vcfg.eta_m, rng)?;

    let depth = out.blocks.len();
    let position = rng.random_range(0..depth.max(1));
    let op = match rng.random_range(0..3) {
        0 if depth < ecfg.max_blocks => {
            out.blocks.insert(position, ecfg.random_block(rng));
            DepthMutation::Add
        }
        1 if depth > ecfg.min_blocks && depth > 0 => {
            out.blocks.remove(position);
            DepthMutation::Remove
        }
        _ => DepthMutation::Keep,
    };
    Ok((out, op))
}

pub fn mutate_chromosome<R: Rng + ?Sized>(
    c: &Chromosome,
    vcfg: &VariationConfig,
    ecfg: &EncodingConfig,
    rng: &mut R,
) -> Result<Chromosome> {
    mutate_chromosome_traced(c, vcfg, ecfg, rng).map(|(c, _)| c)
}

/// A child plus how it was produced. Parent indices refer to the pool
/// passed to [`generate_offspring`].
#[derive(Debug, Clone, PartialEq)]
pub struct Offspring {
    pub chromosome: Chromosome,
    pub parents: [usize; 2],
    pub crossed: bool,
    pub mutated: bool,
}

impl Offspring {
    pub fn operator(&self) -> &'static str {
        match (self.crossed, self.mutated) {
            (true, true) => "crossover+mutation",
            (true, false) => "crossover",
            (false, true) => "mutation",
            (false, false) => "copy",
        }
    }
}

/// Breeds `count` offspring from an evaluated population.
#[allow(clippy::too_many_arguments)]
pub fn generate_offspring<R: Rng + ?Sized>(
    population: &[Chromosome],
    fitness: &[FitnessRecord],
    count: usize,
    vcfg: &VariationConfig,
    ecfg: &EncodingConfig,
    scfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<Offspring>> {
    if population.is_empty() || population.len() != fitness.len() {
        return Err(Error::Selection(format!(
            "{} individuals with {} fitness records",
            population.len(),
            fitness.len()
        )));
    }
    let mut out = Vec::with_capacity(count + 1);
    while out.len() < count {
        let a = slack_binary_tournament(fitness, scfg, rng)?;
        let b = slack_binary_tournament(fitness, scfg, rng)?;
        let crossed = rng.random::<f64>() < vcfg.p_crossover;
        let (c1, c2) = if crossed {
            crossover_chromosomes(&population[a], &population[b], vcfg, ecfg, rng)?
        } else {
            (population[a].clone(), population[b].clone())
        };
        for child in [c1, c2] {
            let mutated = rng.random::<f64>() < vcfg.p_mutation;
            let chromosome = if mutated {
                mutate_chromosome(&child, vcfg, ecfg, rng)?
            } else {
                child
            };
            out.push(Offspring {
                chromosome,
                parents: [a, b],
                crossed,
                mutated,
            });
        }
    }
    out.truncate(count);
    Ok(out)
}
