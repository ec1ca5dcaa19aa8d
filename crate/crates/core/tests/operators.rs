//! Variation operators: SBX, polynomial mutation, chromosome crossover and
//! mutation.

use evonet::genome::{random_chromosome, validate, EncodingConfig};
use evonet::rng::rng_from_seed;
use evonet::variation::{
    crossover_chromosomes, mutate_chromosome, mutate_chromosome_traced, polynomial_mutate,
    sbx_children, sbx_pair, sbx_spread, DepthMutation, VariationConfig,
};
use proptest::prelude::*;
use rand::Rng as _;

#[test]
fn sbx_children_preserve_the_parent_sum_before_clamping() {
    let mut rng = rng_from_seed(1);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let x1: f64 = rng.random_range(-1.0..1.0);
        let x2: f64 = rng.random_range(-1.0..1.0);
        let eta: f64 = rng.random_range(0.1..20.0);
        let (c1, c2) = sbx_children(x1, x2, sbx_spread(rng.random(), eta));
        worst = worst.max(((c1 + c2) - (x1 + x2)).abs());
    }
    assert!(worst <= 1e-12, "worst child-sum drift {worst:e}");
}

#[test]
fn sbx_spread_of_one_half_reproduces_the_parents() {
    assert_eq!(sbx_spread(0.5, 1.0), 1.0);
    let (c1, c2) = sbx_children(0.2, 0.7, 1.0);
    assert!((c1 - 0.2).abs() < 1e-15 && (c2 - 0.7).abs() < 1e-15);
}

#[test]
fn polynomial_mutation_stays_in_bounds() {
    let mut rng = rng_from_seed(2);
    let (lo, hi) = (-0.8, 0.8);
    for _ in 0..10_000 {
        let x = rng.random_range(lo..=hi);
        let y = polynomial_mutate(x, 1.0, lo, hi, &mut rng).unwrap();
        assert!((lo..=hi).contains(&y), "{x} mutated to {y}");
    }
}

#[test]
fn sbx_pair_stays_in_bounds() {
    let mut rng = rng_from_seed(3);
    for _ in 0..10_000 {
        let x1 = rng.random_range(0.0..=0.5);
        let x2 = rng.random_range(0.0..=0.5);
        let (c1, c2) = sbx_pair(x1, x2, 1.0, 0.0, 0.5, &mut rng).unwrap();
        assert!((0.0..=0.5).contains(&c1) && (0.0..=0.5).contains(&c2));
    }
}

#[test]
fn inverted_bounds_are_rejected() {
    let mut rng = rng_from_seed(4);
    assert!(sbx_pair(0.0, 0.1, 1.0, 1.0, 0.0, &mut rng).is_err());
    assert!(polynomial_mutate(0.0, 1.0, 0.5, 0.5, &mut rng).is_err());
}

#[test]
fn depth_mutation_choices_are_uniform_at_interior_depths() {
    let ecfg = EncodingConfig::desk();
    let vcfg = VariationConfig::default();
    let mut rng = rng_from_seed(5);
    let trials = 30_000;
    let mut counts = [0usize; 3];
    for _ in 0..trials {
        let mut c = random_chromosome(&ecfg, &mut rng);
        c.blocks.truncate(3);
        while c.blocks.len() < 3 {
            c.blocks.push(ecfg.random_block(&mut rng));
        }
        let (out, op) = mutate_chromosome_traced(&c, &vcfg, &ecfg, &mut rng).unwrap();
        let expected = match op {
            DepthMutation::Add => 4,
            DepthMutation::Remove => 2,
            DepthMutation::Keep => 3,
        };
        assert_eq!(out.depth(), expected);
        counts[op as usize] += 1;
    }
    for (name, n) in ["add", "remove", "keep"].iter().zip(counts) {
        let f = n as f64 / trials as f64;
        assert!((f - 1.0 / 3.0).abs() <= 0.02, "{name} frequency {f}");
    }
}

#[test]
fn depth_mutation_never_leaves_the_depth_bounds() {
    let ecfg = EncodingConfig::desk();
    let vcfg = VariationConfig::default();
    let mut rng = rng_from_seed(6);
    for depth in [ecfg.min_blocks, ecfg.max_blocks] {
        for _ in 0..2_000 {
            let mut c = random_chromosome(&ecfg, &mut rng);
            c.blocks.resize(depth, ecfg.random_block(&mut rng));
            let out = mutate_chromosome(&c, &vcfg, &ecfg, &mut rng).unwrap();
            assert!((ecfg.min_blocks..=ecfg.max_blocks).contains(&out.depth()));
            assert!(out.depth().abs_diff(depth) <= 1);
        }
    }
}

#[test]
fn crossover_and_mutation_outputs_are_always_valid() {
    for ecfg in [EncodingConfig::desk(), EncodingConfig::default()] {
        let vcfg = VariationConfig::default();
        for seed in 0..1_000 {
            let mut rng = rng_from_seed(10_000 + seed);
            let p1 = random_chromosome(&ecfg, &mut rng);
            let p2 = random_chromosome(&ecfg, &mut rng);
            let (o1, o2) = crossover_chromosomes(&p1, &p2, &vcfg, &ecfg, &mut rng).unwrap();
            assert_eq!(o1.depth(), p1.depth());
            assert_eq!(o2.depth(), p2.depth());
            for c in [&o1, &o2] {
                assert!(validate(c, &ecfg).is_empty(), "seed {seed}: {:?}", validate(c, &ecfg));
                let m = mutate_chromosome(c, &vcfg, &ecfg, &mut rng).unwrap();
                assert!(validate(&m, &ecfg).is_empty(), "seed {seed}: {:?}", validate(&m, &ecfg));
            }
        }
    }
}

#[test]
fn operators_are_deterministic_in_the_rng_stream() {
    let ecfg = EncodingConfig::desk();
    let vcfg = VariationConfig::default();
    let run = |seed| {
        let mut rng = rng_from_seed(seed);
        let p1 = random_chromosome(&ecfg, &mut rng);
        let p2 = random_chromosome(&ecfg, &mut rng);
        let (o1, _) = crossover_chromosomes(&p1, &p2, &vcfg, &ecfg, &mut rng).unwrap();
        mutate_chromosome(&o1, &vcfg, &ecfg, &mut rng).unwrap()
    };
    assert_eq!(run(77), run(77));
}

proptest! {
    #[test]
    fn spread_is_nonnegative_and_monotone(u1 in 0.0f64..0.999, du in 0.0f64..0.5, eta in 0.1f64..30.0) {
        let u2 = (u1 + du).min(0.999);
        let (b1, b2) = (sbx_spread(u1, eta), sbx_spread(u2, eta));
        prop_assert!(b1 >= 0.0);
        prop_assert!(b2 >= b1);
    }

    #[test]
    fn mutation_of_any_in_range_value_stays_in_range(
        x in 0.0f64..=1.0,
        eta in 0.1f64..30.0,
        seed in any::<u64>(),
    ) {
        let mut rng = rng_from_seed(seed);
        let y = polynomial_mutate(x, eta, 0.0, 1.0, &mut rng).unwrap();
        prop_assert!((0.0..=1.0).contains(&y));
    }

    #[test]
    fn sbx_sum_is_preserved_for_any_spread(x1 in -10.0f64..10.0, x2 in -10.0f64..10.0, beta in 0.0f64..50.0) {
        let (c1, c2) = sbx_children(x1, x2, beta);
        prop_assert!(((c1 + c2) - (x1 + x2)).abs() <= 1e-12 * (1.0 + beta) * 10.0);
    }
}
