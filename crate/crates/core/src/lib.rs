//! Genetic search over the architecture and weight initialization of small
//! convolutional denoising networks for hyperspectral image cubes.
//!
//! The pipeline: synthesize or load a cube, add Gaussian noise, cut aligned
//! patch pairs, [`engine::evolve`] a population of variable-length
//! [`genome::Chromosome`]s scored by one-epoch training, then
//! [`engine::final_train`] the winner and [`engine::denoise_cube`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod genome;
pub mod metrics;
pub mod nn;
pub mod parallel;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod tensor;
pub mod variation;

pub use config::EvolutionConfig;
pub use error::{Error, Result};
pub use tensor::Tensor;
