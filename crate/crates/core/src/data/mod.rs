//! Hyperspectral cubes, synthetic data, noise and patch datasets.

pub mod cube;
pub mod patches;

pub use cube::{add_gaussian_noise, load_cube, save_cube, synth_cube, HsiCube, NoiseConfig};
pub use patches::{extract_patches, patch_count, patch_grid, split_patches, split_sizes, Patch, PatchSet};
