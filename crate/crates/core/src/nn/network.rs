//! Layers with cached activations and the sequential [`Network`] they form.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::adam::{adam_step, AdamConfig, Param};
use super::ops;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weights: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Conv2d {
    /// `weights` is `[F, C, k, k]`; bias starts at zero.
    pub fn new(weights: Tensor) -> Result<Self> {
        let (f, _, kh, kw) = weights.dims4()?;
        if kh != kw || kh % 2 == 0 {
            return Err(Error::InvalidShape(format!(
                "kernel must be square and odd, got {kh}x{kw}"
            )));
        }
        Ok(Conv2d {
            weights: Param::new(weights),
            bias: Param::new(Tensor::zeros(&[f])),
            input: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weights.value.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.value.shape()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.weights.value.shape()[2]
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<ops::BatchNormCache>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Param::new(Tensor::full(&[channels], 1.0)),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    ConvValid(Conv2d),
    ReflectPad { pad: usize },
    BatchNorm(BatchNorm),
    Relu { input: Option<Tensor> },
}

impl Layer {
    pub fn relu() -> Self {
        Layer::Relu { input: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::ConvValid(_) => "conv",
            Layer::ReflectPad { .. } => "reflect_pad",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Relu { .. } => "relu",
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::ConvValid(c) => vec![&c.weights, &c.bias],
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::ConvValid(c) => vec![&mut c.weights, &mut c.bias],
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            _ => Vec::new(),
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let keep = mode == Mode::Train;
        match self {
            Layer::ConvValid(conv) => {
                let y = ops::conv2d_valid(x, &conv.weights.value, &conv.bias.value)?;
                conv.input = keep.then(|| x.clone());
                Ok(y)
            }
            Layer::ReflectPad { pad } => ops::reflect_pad(x, *pad),
            Layer::BatchNorm(bn) => match mode {
                Mode::Train => {
                    let (y, cache) =
                        ops::batch_norm_train(x, &bn.gamma.value, &bn.beta.value, bn.eps)?;
                    let m = bn.momentum;
                    for (r, b) in bn.running_mean.iter_mut().zip(&cache.mean) {
                        *r = (1.0 - m) * *r + m * b;
                    }
                    for (r, b) in bn.running_var.iter_mut().zip(&cache.var) {
                        *r = (1.0 - m) * *r + m * b;
                    }
                    bn.cache = Some(cache);
                    Ok(y)
                }
                Mode::Eval => ops::batch_norm_eval(
                    x,
                    &bn.gamma.value,
                    &bn.beta.value,
                    &bn.running_mean,
                    &bn.running_var,
                    bn.eps,
                ),
            },
            Layer::Relu { input } => {
                let y = ops::relu(x);
                *input = keep.then(|| x.clone());
                Ok(y)
            }
        }
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let missing = || Error::InvalidParameter("backward called without a Train-mode forward".into());
        match self {
            Layer::ConvValid(conv) => {
                let input = conv.input.take().ok_or_else(missing)?;
                let g = ops::conv2d_valid_backward(&input, &conv.weights.value, grad)?;
                conv.weights.accumulate(&g.weights);
                conv.bias.accumulate(&g.bias);
                Ok(g.input)
            }
            Layer::ReflectPad { pad } => ops::reflect_pad_backward(grad, *pad),
            Layer::BatchNorm(bn) => {
                let cache = bn.cache.take().ok_or_else(missing)?;
                let (dx, dgamma, dbeta) = ops::batch_norm_backward(grad, &cache, &bn.gamma.value)?;
                bn.gamma.accumulate(&dgamma);
                bn.beta.accumulate(&dbeta);
                Ok(dx)
            }
            Layer::Relu { input } => {
                let input = input.take().ok_or_else(missing)?;
                ops::relu_backward(&input, grad)
            }
        }
    }
}

/// A sequential stack of layers.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    mode: Mode,
}

impl Network {
    /// Builds a network after checking that channel counts chain.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let mut channels: Option<usize> = None;
        for (i, layer) in layers.iter().enumerate() {
            let (input, output) = match layer {
                Layer::ConvValid(c) => (Some(c.in_channels()), Some(c.out_channels())),
                Layer::BatchNorm(b) => (Some(b.channels()), Some(b.channels())),
                Layer::ReflectPad { pad } => {
                    if *pad == 0 {
                        return Err(Error::InvalidParameter(format!("layer {i}: pad must be >= 1")));
                    }
                    (None, None)
                }
                Layer::Relu { .. } => (None, None),
            };
            if let (Some(prev), Some(inp)) = (channels, input) {
                if prev != inp {
                    return Err(Error::InvalidShape(format!(
                        "layer {i} ({}) expects {inp} channels, previous layer yields {prev}",
                        layer.name()
                    )));
                }
            }
            if output.is_some() {
                channels = output;
            }
        }
        Ok(Network {
            layers,
            mode: Mode::Train,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Channel count of the first convolution, if any.
    pub fn in_channels(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::ConvValid(c) => Some(c.in_channels()),
            Layer::BatchNorm(b) => Some(b.channels()),
            _ => None,
        })
    }

    pub fn max_kernel_size(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::ConvValid(c) => Some(c.kernel_size()),
                _ => None,
            })
            .max()
            .unwrap_or(1)
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let mode = self.mode;
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode)?;
        }
        Ok(x)
    }

    /// Backpropagates `grad` through the layers in reverse, accumulating
    /// parameter gradients. Returns the gradient w.r.t. the network input.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            layer.params_mut().into_iter().for_each(Param::zero_grad);
        }
    }

    pub fn adam_step(&mut self, lr: f64, cfg: &AdamConfig) {
        for layer in &mut self.layers {
            for p in layer.params_mut() {
                adam_step(p, lr, cfg);
            }
        }
    }

    /// Number of trained scalars (running statistics excluded).
    pub fn trainable_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|p| p.value.len())
            .sum()
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .all(|p| p.value.all_finite())
    }
}
