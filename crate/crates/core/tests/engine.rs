//! Training, evolution, tiled denoising and checkpoints.

use evonet::checkpoint;
use evonet::data::{synth_cube, HsiCube, NoiseConfig};
use evonet::engine::denoise::tile_starts;
use evonet::engine::{denoise_cube, evaluate_fitness, evolve, final_train, invalid_records, train_network};
use evonet::genome::{decode, param_count, random_chromosome, EncodingConfig};
use evonet::nn::{Conv2d, Layer, Mode, Network};
use evonet::parallel::with_jobs;
use evonet::pipeline::{prepare_splits, PatchConfig, Splits};
use evonet::rng::rng_from_seed;
use evonet::{EvolutionConfig, Tensor};

fn small_config() -> EvolutionConfig {
    EvolutionConfig {
        population_size: 4,
        generations: 2,
        batch_size: 4,
        final_max_epochs: 30,
        final_patience: 5,
        ..EvolutionConfig::desk()
    }
}

fn small_splits(seed: u64) -> Splits {
    let clean = synth_cube(32, 32, 4, &mut rng_from_seed(seed)).unwrap();
    let patches = PatchConfig {
        patch_size: 12,
        stride: 4,
        ..PatchConfig::default()
    };
    prepare_splits(&clean, &NoiseConfig { sigma: 0.1 }, &patches, seed).unwrap()
}

fn identity_net(c: usize) -> Network {
    let mut w = Tensor::zeros(&[c, c, 1, 1]);
    for i in 0..c {
        w.data_mut()[i * c + i] = 1.0;
    }
    Network::new(vec![Layer::ConvValid(Conv2d::new(w).unwrap())]).unwrap()
}

#[test]
fn complexity_matches_a_census_of_the_built_network() {
    let mut rng = rng_from_seed(1);
    for enc in [EncodingConfig::desk(), EncodingConfig::default()] {
        for _ in 0..50 {
            let c = random_chromosome(&enc, &mut rng);
            let channels = [1, 3, 8][c.depth() % 3];
            let net = decode(&c, channels, &enc).unwrap().build(&mut rng).unwrap();
            let census: usize = net
                .layers()
                .iter()
                .flat_map(|l| l.params())
                .map(|p| p.value.data().len())
                .sum();
            assert_eq!(param_count(&c, channels, &enc), census);
        }
    }
}

#[test]
fn fitness_is_deterministic_for_a_weight_seed() {
    let s = small_splits(2);
    let cfg = small_config();
    let c = random_chromosome(&cfg.encoding, &mut rng_from_seed(3));
    let a = evaluate_fitness(&c, &s.train_set(), &s.eval_set(), &cfg, 42).unwrap();
    let b = evaluate_fitness(&c, &s.train_set(), &s.eval_set(), &cfg, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.complexity, param_count(&c, 4, &cfg.encoding));
}

#[test]
fn divergent_individuals_get_the_infinite_sentinel() {
    let s = small_splits(2);
    let cfg = EvolutionConfig {
        eval_lr: 1e300,
        ..small_config()
    };
    let c = random_chromosome(&cfg.encoding, &mut rng_from_seed(3));
    let rec = evaluate_fitness(&c, &s.train_set(), &s.eval_set(), &cfg, 1).unwrap();
    assert!(rec.mse.is_infinite());
}

#[test]
fn evolution_invariants_hold_and_runs_are_reproducible() {
    let s = small_splits(4);
    let cfg = small_config();
    let run = |jobs| with_jobs(Some(jobs), || evolve(&cfg, &s.train_set(), &s.eval_set(), 9).unwrap());
    let a = run(1);
    let best = a.history.best_mse_per_generation();
    assert_eq!(best.len(), cfg.generations + 1);
    assert!(best.windows(2).all(|w| w[1] <= w[0]), "{best:?}");
    assert!(invalid_records(&a.history).is_empty());
    assert_eq!(a.history.records.len(), cfg.population_size * (cfg.generations + 1));

    let b = run(1);
    assert_eq!(a.history.to_jsonl(), b.history.to_jsonl());
    let c = run(3);
    assert_eq!(a.history.to_jsonl(), c.history.to_jsonl());
    assert_eq!(a.history.summary_json(), c.history.summary_json());
}

#[test]
fn patience_stops_a_constant_loss_network_after_two_epochs() {
    let s = small_splits(5);
    let cfg = EvolutionConfig {
        final_patience: 1,
        final_lr: 0.0,
        ..small_config()
    };
    let out = train_network(identity_net(4), &s.combined_set().unwrap(), &cfg, 0).unwrap();
    assert_eq!(out.curve.len(), 2);
    assert_eq!(out.best_epoch, 1);
}

#[test]
fn final_training_keeps_the_best_epoch() {
    let s = small_splits(6);
    let cfg = small_config();
    let c = random_chromosome(&cfg.encoding, &mut rng_from_seed(7));
    let out = final_train(&c, &s.combined_set().unwrap(), &cfg, 11).unwrap();
    let best = &out.curve[out.best_epoch - 1];
    assert!(out.curve.iter().all(|e| e.heldout_mse >= best.heldout_mse));
    assert!(best.train_mse <= out.curve[0].train_mse);
    assert_eq!(out.network.mode(), Mode::Eval);
    assert!(out.curve.len() <= cfg.final_max_epochs);
    assert!(out.curve_csv().starts_with("epoch,train_mse,heldout_mse\n"));
}

#[test]
fn tiles_cover_every_position() {
    for (len, tile, overlap) in [(64, 32, 8), (10, 4, 1), (5, 8, 2), (33, 16, 15), (16, 16, 0)] {
        let starts = tile_starts(len, tile, overlap);
        let t = tile.min(len);
        assert_eq!(*starts.last().unwrap() + t, len);
        let mut covered = vec![false; len];
        for s in &starts {
            covered[*s..s + t].iter_mut().for_each(|c| *c = true);
        }
        assert!(covered.iter().all(|&c| c), "{len} {tile} {overlap}: {starts:?}");
    }
}

#[test]
fn identity_model_denoises_to_its_input() {
    let cube = synth_cube(37, 29, 3, &mut rng_from_seed(8)).unwrap();
    for (tile, overlap) in [(8, 3), (16, 0), (64, 8)] {
        let out = denoise_cube(&identity_net(3), &cube, tile, overlap).unwrap();
        for (a, b) in out.data().iter().zip(cube.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn single_tile_matches_a_direct_forward_pass() {
    let enc = EncodingConfig::desk();
    let mut rng = rng_from_seed(9);
    let c = random_chromosome(&enc, &mut rng);
    let mut net = decode(&c, 2, &enc).unwrap().build(&mut rng).unwrap();
    net.set_mode(Mode::Eval);
    let cube = synth_cube(12, 10, 2, &mut rng).unwrap();
    let tiled = denoise_cube(&net, &cube, 32, 4).unwrap();
    let chw = evonet::engine::dataset::hwc_to_chw(cube.data(), 12, 10, 2);
    let direct = net.forward(&Tensor::new(&[1, 2, 12, 10], chw).unwrap()).unwrap();
    let expected = evonet::engine::dataset::chw_to_hwc(direct.data(), 12, 10, 2);
    for (a, b) in tiled.data().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn denoising_rejects_bad_geometry() {
    let cube = HsiCube::new(8, 8, 2, vec![0.5; 128], (0.0, 1.0)).unwrap();
    assert!(denoise_cube(&identity_net(3), &cube, 8, 2).is_err());
    assert!(denoise_cube(&identity_net(2), &cube, 4, 4).is_err());
}

#[test]
fn checkpoints_round_trip_exactly() {
    let s = small_splits(10);
    let cfg = small_config();
    let c = random_chromosome(&cfg.encoding, &mut rng_from_seed(12));
    let trained = final_train(&c, &s.combined_set().unwrap(), &cfg, 3).unwrap().network;
    let bytes = checkpoint::to_bytes(&trained);
    let back = checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(checkpoint::to_bytes(&back), bytes);
    assert_eq!(checkpoint::digest(&back), checkpoint::digest(&trained));

    let cube = synth_cube(20, 20, 4, &mut rng_from_seed(13)).unwrap();
    let a = denoise_cube(&trained, &cube, 16, 4).unwrap();
    let b = denoise_cube(&back, &cube, 16, 4).unwrap();
    assert_eq!(a, b);

    assert!(checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(checkpoint::from_bytes(&bad).is_err());
}
