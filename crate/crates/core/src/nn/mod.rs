//! A minimal convolutional network library: valid convolution, reflect-101
//! padding, batch normalization, ReLU, MSE loss and Adam.

pub mod adam;
pub mod init;
pub mod network;
pub mod ops;

pub use adam::{adam_step, AdamConfig, Param};
pub use init::gaussian_init;
pub use network::{BatchNorm, Conv2d, Layer, Mode, Network};
