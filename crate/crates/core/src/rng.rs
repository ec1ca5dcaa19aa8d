//! Seed derivation for independent, order-free random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream whose seed is a
//! pure function of the run seed and a path of labels, so the result of a
//! parallel stage never depends on which worker ran first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels used by the pipeline.
pub mod stream {
    pub const NOISE: u64 = 0x6e_6f69_7365;
    pub const SPLIT: u64 = 0x73_706c_6974;
    pub const EVOLVE: u64 = 0x6576_6f6c_7665;
    pub const WEIGHTS: u64 = 0x7765_6967_6874;
    pub const FINAL: u64 = 0x66_696e_616c;
    pub const SYNTH: u64 = 0x73_796e_7468;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `seed` with each label in turn.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, labels: &[u64]) -> Rng {
    rng_from_seed(derive_seed(seed, labels))
}

/// Seed for the weights of the individual at `(generation, index)`.
pub fn weight_seed(run_seed: u64, generation: usize, index: usize) -> u64 {
    derive_seed(
        run_seed,
        &[stream::WEIGHTS, generation as u64, index as u64],
    )
}
