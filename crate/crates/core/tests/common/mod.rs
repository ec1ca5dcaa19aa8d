#![allow(dead_code)]

use evonet::rng::{rng_from_seed, Rng};
use evonet::Tensor;
use rand::Rng as _;

pub const H: f64 = 1e-4;
pub const TOL: f64 = 1e-4;
pub const CASES: u64 = 20;

pub fn rng(seed: u64) -> Rng {
    rng_from_seed(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Entries bounded away from zero so that ReLU is differentiable within `H`.
pub fn random_tensor_off_zero(shape: &[usize], rng: &mut Rng) -> Tensor {
    let mut t = random_tensor(shape, rng);
    for v in t.data_mut() {
        if v.abs() < 0.05 {
            *v = 0.05f64.copysign(*v);
        }
    }
    t
}

pub fn dot(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Central differences of `f` at every entry of `x`.
pub fn numeric_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + H;
        let up = f(&probe);
        probe.data_mut()[i] = orig - H;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * H);
    }
    grad
}

/// `|a - n| / max(|a|, |n|)` in the Euclidean norm; zero when both vanish.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    let norm = |it: &mut dyn Iterator<Item = f64>| it.map(|v| v * v).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.data().iter().zip(numeric.data()).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.data().iter().copied()).max(norm(&mut numeric.data().iter().copied()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn assert_close_grad(what: &str, case: u64, analytic: &Tensor, numeric: &Tensor) -> f64 {
    let err = relative_error(analytic, numeric);
    assert!(err <= TOL, "{what}, case {case}: relative error {err:e} > {TOL:e}");
    err
}
