//! Slack binary tournament, elitist environmental selection and best-pick.
//!
//! All functions work on slices of [`FitnessRecord`] and return indices into
//! that slice, so callers keep ownership of their individuals.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation-set MSE and trainable parameter count of one individual.
/// A diverged individual carries `mse = +inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub mse: f64,
    pub complexity: usize,
}

impl FitnessRecord {
    pub fn diverged(complexity: usize) -> Self {
        FitnessRecord {
            mse: f64::INFINITY,
            complexity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    /// Relative MSE gap above which the better individual wins outright.
    pub alpha: f64,
    /// Absolute complexity gap; when unset, `beta_fraction` of the mean
    /// complexity of the population passed to each call is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub beta_fraction: f64,
    pub elitism_rate: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.05,
            beta: None,
            beta_fraction: 0.05,
            elitism_rate: 0.2,
        }
    }
}

impl SelectionConfig {
    pub fn check(&self) -> Result<()> {
        let beta_ok = self.beta.is_none_or(|b| b >= 0.0);
        if !(self.alpha >= 0.0 && beta_ok && self.beta_fraction >= 0.0) {
            return Err(Error::InvalidParameter(
                "selection alpha, beta and beta_fraction must be >= 0".into(),
            ));
        }
        if !(self.elitism_rate > 0.0 && self.elitism_rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "elitism rate {} must lie in (0, 1)",
                self.elitism_rate
            )));
        }
        Ok(())
    }

    /// Complexity threshold for tournaments over `pool`.
    pub fn resolve_beta(&self, pool: &[FitnessRecord]) -> f64 {
        self.beta.unwrap_or_else(|| {
            if pool.is_empty() {
                0.0
            } else {
                let mean =
                    pool.iter().map(|f| f.complexity as f64).sum::<f64>() / pool.len() as f64;
                self.beta_fraction * mean
            }
        })
    }
}

/// Which rule decided a tournament.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The MSE gap ratio exceeded alpha: smaller MSE wins.
    MseGap,
    /// MSEs were close and the better one was more complex by over beta.
    ComplexitySlack,
    /// Neither slack condition fired: smaller MSE wins.
    Fallback,
}

fn mse_ratio(m1: f64, m2: f64) -> f64 {
    if m1 == m2 {
        0.0
    } else if m1 == 0.0 {
        f64::INFINITY
    } else {
        (m2 - m1) / m1
    }
}

/// Decides between two candidates. `a` is taken as the smaller-MSE
/// individual on ties. Returns the winner (`a` or `b`) and the branch taken.
pub fn tournament_decision(
    a: usize,
    b: usize,
    fa: &FitnessRecord,
    fb: &FitnessRecord,
    alpha: f64,
    beta: f64,
) -> (usize, Branch) {
    let ((i1, f1), (i2, f2)) = if fa.mse <= fb.mse || fb.mse.is_nan() {
        ((a, fa), (b, fb))
    } else {
        ((b, fb), (a, fa))
    };
    if mse_ratio(f1.mse, f2.mse) > alpha {
        (i1, Branch::MseGap)
    } else if f1.complexity as f64 - f2.complexity as f64 > beta {
        (i2, Branch::ComplexitySlack)
    } else {
        (i1, Branch::Fallback)
    }
}

fn pick_two<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

fn tournament_with_beta<R: Rng + ?Sized>(
    pool: &[FitnessRecord],
    candidates: &[usize],
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> usize {
    let (i, j) = pick_two(candidates.len(), rng);
    let (a, b) = (candidates[i], candidates[j]);
    tournament_decision(a, b, &pool[a], &pool[b], alpha, beta).0
}

/// Picks one individual from two distinct uniformly drawn candidates.
pub fn slack_binary_tournament<R: Rng + ?Sized>(
    pool: &[FitnessRecord],
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<usize> {
    if pool.len() < 2 {
        return Err(Error::Selection(format!(
            "tournament needs at least 2 individuals, got {}",
            pool.len()
        )));
    }
    let all: Vec<usize> = (0..pool.len()).collect();
    let beta = cfg.resolve_beta(pool);
    Ok(tournament_with_beta(pool, &all, cfg.alpha, beta, rng))
}

/// Rank order: smaller MSE, then smaller complexity, then earlier index.
pub fn rank_cmp(pool: &[FitnessRecord], a: usize, b: usize) -> Ordering {
    pool[a]
        .mse
        .total_cmp(&pool[b].mse)
        .then(pool[a].complexity.cmp(&pool[b].complexity))
        .then(a.cmp(&b))
}

/// Chooses `n` distinct survivors from `pool` (parents followed by
/// offspring). The best `ceil(elitism_rate * n)` survive by rank; the rest
/// are filled by tournaments over the residual pool without replacement.
pub fn environmental_selection<R: Rng + ?Sized>(
    pool: &[FitnessRecord],
    n: usize,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if pool.len() < n {
        return Err(Error::Selection(format!(
            "pool of {} cannot fill a population of {n}",
            pool.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| rank_cmp(pool, a, b));
    let elites = ((cfg.elitism_rate * n as f64).ceil() as usize).min(n);
    let mut chosen: Vec<usize> = order[..elites].to_vec();
    let mut residual: Vec<usize> = (0..pool.len()).filter(|i| !chosen.contains(i)).collect();
    let beta = cfg.resolve_beta(pool);
    while chosen.len() < n {
        let winner = if residual.len() == 1 {
            residual[0]
        } else {
            tournament_with_beta(pool, &residual, cfg.alpha, beta, rng)
        };
        residual.retain(|&i| i != winner);
        chosen.push(winner);
    }
    Ok(chosen)
}

pub fn best_individual(pool: &[FitnessRecord]) -> Result<usize> {
    (0..pool.len())
        .min_by(|&a, &b| rank_cmp(pool, a, b))
        .ok_or_else(|| Error::Selection("empty population".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn rec(mse: f64, complexity: usize) -> FitnessRecord {
        FitnessRecord { mse, complexity }
    }

    #[test]
    fn zero_mse_guard() {
        let (w, br) = tournament_decision(0, 1, &rec(0.0, 10), &rec(0.5, 1), 0.05, 0.0);
        assert_eq!((w, br), (0, Branch::MseGap));
        // both zero: ratio 0 falls through to complexity
        let (w, br) = tournament_decision(0, 1, &rec(0.0, 10), &rec(0.0, 1), 0.05, 5.0);
        assert_eq!((w, br), (1, Branch::ComplexitySlack));
    }

    #[test]
    fn diverged_individuals_lose() {
        let (w, _) = tournament_decision(0, 1, &rec(f64::INFINITY, 1), &rec(3.0, 100), 0.05, 0.0);
        assert_eq!(w, 1);
    }

    #[test]
    fn alpha_zero_is_pure_mse() {
        let mut rng = rng_from_seed(2);
        for _ in 0..1000 {
            let m1: f64 = rng.random_range(0.01..1.0);
            let m2 = m1 * rng.random_range(1.0001..2.0);
            let (w, _) = tournament_decision(
                1,
                0,
                &rec(m2, 1),
                &rec(m1, rng.random_range(0..100_000)),
                0.0,
                0.0,
            );
            assert_eq!(w, 0);
        }
    }

    #[test]
    fn tournament_needs_two() {
        assert!(slack_binary_tournament(&[rec(1.0, 1)], &SelectionConfig::default(), &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn beta_defaults_to_fraction_of_mean_complexity() {
        let cfg = SelectionConfig::default();
        assert_eq!(cfg.resolve_beta(&[rec(1.0, 100), rec(1.0, 300)]), 10.0);
        let fixed = SelectionConfig {
            beta: Some(7.0),
            ..cfg
        };
        assert_eq!(fixed.resolve_beta(&[rec(1.0, 100)]), 7.0);
    }

    #[test]
    fn elites_by_rank() {
        let pool: Vec<_> = (0..20).map(|i| rec(1.0 + ((i * 7) % 20) as f64, 10)).collect();
        let cfg = SelectionConfig::default();
        let out = environmental_selection(&pool, 10, &cfg, &mut rng_from_seed(4)).unwrap();
        assert_eq!(out.len(), 10);
        let mut sorted: Vec<usize> = (0..20).collect();
        sorted.sort_by(|&a, &b| rank_cmp(&pool, a, b));
        assert_eq!(&out[..2], &sorted[..2]);
    }

    #[test]
    fn worse_offspring_keep_parent_best() {
        let parents = [rec(0.5, 10), rec(0.7, 10), rec(0.9, 10)];
        let offspring = [rec(2.0, 1), rec(3.0, 1), rec(4.0, 1)];
        let pool: Vec<_> = parents.iter().chain(&offspring).copied().collect();
        let out = environmental_selection(&pool, 3, &SelectionConfig::default(), &mut rng_from_seed(1)).unwrap();
        let best = out.iter().map(|&i| pool[i].mse).fold(f64::INFINITY, f64::min);
        assert_eq!(best, 0.5);
    }

    #[test]
    fn pool_too_small() {
        let pool = [rec(1.0, 1)];
        assert!(environmental_selection(&pool, 2, &SelectionConfig::default(), &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn best_tie_break() {
        assert_eq!(best_individual(&[rec(1.0, 5)]).unwrap(), 0);
        assert_eq!(best_individual(&[rec(1.0, 200), rec(1.0, 100)]).unwrap(), 1);
        assert!(best_individual(&[]).is_err());
    }

    #[test]
    fn best_matches_scan() {
        let mut rng = rng_from_seed(17);
        for _ in 0..100 {
            let pool: Vec<_> = (0..15)
                .map(|_| rec(rng.random_range(0..5) as f64, rng.random_range(0..4)))
                .collect();
            let mut best = 0;
            for i in 1..pool.len() {
                let (a, b) = (pool[i], pool[best]);
                if a.mse < b.mse || (a.mse == b.mse && a.complexity < b.complexity) {
                    best = i;
                }
            }
            assert_eq!(best_individual(&pool).unwrap(), best);
        }
    }
}
