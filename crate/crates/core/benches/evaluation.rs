//! Sequential (one worker) against data-parallel execution of the hot
//! paths: population fitness evaluation, tiled denoising and metrics.
//!
//! Build with `--no-default-features` to measure the fallback without rayon.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evonet::data::{synth_cube, NoiseConfig};
use evonet::engine::{denoise_cube, evaluate_fitness};
use evonet::genome::decode;
use evonet::variation::init_population;
use evonet::metrics::{report, MetricConfig};
use evonet::parallel::{map_indexed, with_jobs};
use evonet::pipeline::{prepare_splits, PatchConfig};
use evonet::rng::{rng_from_seed, weight_seed};
use evonet::EvolutionConfig;

fn modes() -> Vec<(&'static str, Option<usize>)> {
    vec![("sequential", Some(1)), ("parallel", None)]
}

fn fitness(c: &mut Criterion) {
    let cfg = EvolutionConfig {
        eval_epochs: 1,
        ..EvolutionConfig::desk()
    };
    let clean = synth_cube(64, 64, 8, &mut rng_from_seed(1)).unwrap();
    let patches = PatchConfig {
        patch_size: 16,
        stride: 8,
        ..PatchConfig::default()
    };
    let splits = prepare_splits(&clean, &NoiseConfig { sigma: 0.1 }, &patches, 1).unwrap();
    let (train, eval) = (splits.train_set(), splits.eval_set());
    let population = init_population(cfg.population_size, &cfg.encoding, &mut rng_from_seed(2));

    let mut group = c.benchmark_group("population_fitness");
    group.sample_size(10);
    for (name, jobs) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                with_jobs(jobs, || {
                    map_indexed(population.len(), |i| {
                        evaluate_fitness(&population[i], &train, &eval, &cfg, weight_seed(1, 0, i)).unwrap()
                    })
                })
            })
        });
    }
    group.finish();
}

fn denoise(c: &mut Criterion) {
    let cfg = EvolutionConfig::desk();
    let population = init_population(1, &cfg.encoding, &mut rng_from_seed(3));
    let net = decode(&population[0], 8, &cfg.encoding)
        .unwrap()
        .build(&mut rng_from_seed(4))
        .unwrap();
    let cube = synth_cube(96, 96, 8, &mut rng_from_seed(5)).unwrap();
    let mut group = c.benchmark_group("denoise_cube");
    group.sample_size(10);
    for (name, jobs) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_jobs(jobs, || denoise_cube(&net, &cube, 32, 8).unwrap()))
        });
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let clean = synth_cube(128, 128, 32, &mut rng_from_seed(6)).unwrap();
    let noisy = evonet::data::add_gaussian_noise(&clean, &NoiseConfig { sigma: 0.1 }, &mut rng_from_seed(7)).unwrap();
    let mut group = c.benchmark_group("metrics_report");
    for (name, jobs) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_jobs(jobs, || report(&clean, &noisy, &MetricConfig::default()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, fitness, denoise, metrics);
criterion_main!(benches);
