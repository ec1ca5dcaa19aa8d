use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// I.i.d. `Normal(mean, std^2)` samples; `std == 0` gives a constant tensor.
pub fn gaussian_init<R: Rng + ?Sized>(
    shape: &[usize],
    mean: f64,
    std: f64,
    rng: &mut R,
) -> Result<Tensor> {
    if !(std >= 0.0) || !mean.is_finite() || !std.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gaussian init needs finite mean and std >= 0, got mean {mean}, std {std}"
        )));
    }
    let len: usize = shape.iter().product();
    let data = if std == 0.0 {
        vec![mean; len]
    } else {
        let normal = Normal::new(mean, std).expect("validated above");
        (0..len).map(|_| normal.sample(rng)).collect()
    };
    Tensor::new(shape, data)
}
