use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// A trainable tensor with its gradient and Adam moment estimates.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub first_moment: Tensor,
    pub second_moment: Tensor,
    pub step: u64,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Param {
            grad: zeros.clone(),
            first_moment: zeros.clone(),
            second_moment: zeros,
            value,
            step: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn accumulate(&mut self, grad: &Tensor) {
        debug_assert_eq!(grad.shape(), self.grad.shape());
        for (g, d) in self.grad.data_mut().iter_mut().zip(grad.data()) {
            *g += d;
        }
    }
}

/// One bias-corrected Adam update of `param` from its current gradient.
pub fn adam_step(param: &mut Param, lr: f64, cfg: &AdamConfig) {
    param.step += 1;
    let t = param.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    let Param {
        value,
        grad,
        first_moment,
        second_moment,
        ..
    } = param;
    for (((w, &g), m), v) in value
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(first_moment.data_mut())
        .zip(second_moment.data_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *w -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}
