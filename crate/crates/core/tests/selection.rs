//! Slack binary tournament and elitist environmental selection.

use evonet::rng::rng_from_seed;
use evonet::selection::{
    best_individual, environmental_selection, slack_binary_tournament, tournament_decision, Branch,
    FitnessRecord, SelectionConfig,
};
use rand::Rng as _;

fn rec(mse: f64, complexity: usize) -> FitnessRecord {
    FitnessRecord { mse, complexity }
}

fn cfg(alpha: f64, beta: f64) -> SelectionConfig {
    SelectionConfig {
        alpha,
        beta: Some(beta),
        ..SelectionConfig::default()
    }
}

/// Runs the tournament on a two-member pool (both members are always drawn)
/// and checks both draw orders.
fn winner(pool: &[FitnessRecord; 2], scfg: &SelectionConfig) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..16 {
        seen.insert(slack_binary_tournament(pool, scfg, &mut rng_from_seed(seed)).unwrap());
    }
    assert_eq!(seen.len(), 1, "tournament outcome depends on draw order");
    *seen.first().unwrap()
}

#[test]
fn mse_gap_branch_returns_the_smaller_mse() {
    let pool = [rec(1.2, 10), rec(1.0, 1_000_000)];
    assert_eq!(winner(&pool, &cfg(0.05, 1e5)), 1);
    assert_eq!(tournament_decision(0, 1, &pool[0], &pool[1], 0.05, 1e5), (1, Branch::MseGap));
}

#[test]
fn complexity_slack_branch_returns_the_simpler_individual() {
    let pool = [rec(1.0, 1000), rec(1.1, 500)];
    assert_eq!(winner(&pool, &cfg(0.5, 100.0)), 1);
    assert_eq!(
        tournament_decision(0, 1, &pool[0], &pool[1], 0.5, 100.0),
        (1, Branch::ComplexitySlack)
    );
}

#[test]
fn fallback_branch_returns_the_smaller_mse() {
    let pool = [rec(1.0, 1000), rec(1.1, 500)];
    assert_eq!(winner(&pool, &cfg(0.5, 1e6)), 0);
    assert_eq!(
        tournament_decision(0, 1, &pool[0], &pool[1], 0.5, 1e6),
        (0, Branch::Fallback)
    );
}

#[test]
fn zero_mse_wins_outright() {
    let (a, b) = (rec(0.0, 10_000), rec(1e-9, 1));
    assert_eq!(tournament_decision(0, 1, &a, &b, 0.05, 0.0), (0, Branch::MseGap));
}

#[test]
fn diverged_individuals_lose_to_finite_ones() {
    let (a, b) = (FitnessRecord::diverged(1), rec(5.0, 1_000_000));
    assert_eq!(tournament_decision(0, 1, &a, &b, 0.05, 0.0).0, 1);
}

#[test]
fn tournament_needs_two_individuals() {
    assert!(slack_binary_tournament(&[rec(1.0, 1)], &SelectionConfig::default(), &mut rng_from_seed(0)).is_err());
}

#[test]
fn elites_are_taken_by_rank() {
    let pool: Vec<FitnessRecord> = (0..20).map(|i| rec(20.0 - i as f64, 10)).collect();
    let scfg = SelectionConfig::default();
    let chosen = environmental_selection(&pool, 10, &scfg, &mut rng_from_seed(1)).unwrap();
    assert_eq!(&chosen[..2], &[19, 18]);
}

#[test]
fn elitism_keeps_the_parents_best_when_offspring_are_worse() {
    let parents: Vec<FitnessRecord> = (0..8).map(|i| rec(1.0 + i as f64, 100)).collect();
    let offspring: Vec<FitnessRecord> = (0..8).map(|i| rec(50.0 + i as f64, 100)).collect();
    let pool = [parents, offspring].concat();
    for seed in 0..50 {
        let chosen = environmental_selection(&pool, 8, &SelectionConfig::default(), &mut rng_from_seed(seed)).unwrap();
        let best = chosen.iter().map(|&i| pool[i].mse).fold(f64::INFINITY, f64::min);
        assert_eq!(best, 1.0);
    }
}

#[test]
fn selection_returns_exactly_n_distinct_members() {
    let mut rng = rng_from_seed(9);
    for _ in 0..500 {
        let size = rng.random_range(2..40);
        let n = rng.random_range(1..=size);
        let pool: Vec<FitnessRecord> = (0..size)
            .map(|_| {
                if rng.random_bool(0.1) {
                    FitnessRecord::diverged(rng.random_range(1..1000))
                } else {
                    rec(rng.random_range(0.0..2.0), rng.random_range(1..100_000))
                }
            })
            .collect();
        let scfg = SelectionConfig {
            elitism_rate: rng.random_range(0.0..=1.0),
            ..SelectionConfig::default()
        };
        let chosen = environmental_selection(&pool, n, &scfg, &mut rng).unwrap();
        assert_eq!(chosen.len(), n);
        let mut sorted = chosen.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), n);
        assert!(chosen.iter().all(|&i| i < size));
    }
}

#[test]
fn undersized_pool_is_rejected() {
    let pool = vec![rec(1.0, 1); 3];
    assert!(environmental_selection(&pool, 4, &SelectionConfig::default(), &mut rng_from_seed(0)).is_err());
}

#[test]
fn best_individual_breaks_ties_by_complexity_then_order() {
    let pool = [rec(1.0, 50), rec(0.5, 90), rec(0.5, 40), rec(0.5, 40)];
    assert_eq!(best_individual(&pool).unwrap(), 2);
    assert!(best_individual(&[]).is_err());
}
