//! Stateless forward and backward kernels for the layer types a decoded
//! genome can contain.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients of a valid convolution.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check_conv(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    let (_, c, h, w) = input.dims4()?;
    let (f, wc, kh, kw) = weights.dims4()?;
    if wc != c {
        return Err(Error::InvalidShape(format!(
            "weights expect {wc} input channels, input has {c}"
        )));
    }
    if kh != kw || kh % 2 == 0 {
        return Err(Error::InvalidShape(format!(
            "kernel must be square and odd, got {kh}x{kw}"
        )));
    }
    if bias.shape() != [f] {
        return Err(Error::InvalidShape(format!(
            "bias shape {:?} does not match {f} filters",
            bias.shape()
        )));
    }
    if kh > h || kh > w {
        return Err(Error::KernelTooLarge {
            kernel: kh,
            height: h,
            width: w,
        });
    }
    Ok((f, kh))
}

/// Unrolls one `[C,H,W]` sample into a `[C*k*k, Ho*Wo]` column matrix.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, k: usize, cols: &mut [f64]) {
    let (ho, wo) = (h - k + 1, w - k + 1);
    let p = ho * wo;
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut cols[((ch * k + ki) * k + kj) * p..][..p];
                for oy in 0..ho {
                    let src = &plane[(oy + ki) * w + kj..][..wo];
                    row[oy * wo..(oy + 1) * wo].copy_from_slice(src);
                }
            }
        }
    }
}

fn col2im_add(cols: &[f64], c: usize, h: usize, w: usize, k: usize, dx: &mut [f64]) {
    let (ho, wo) = (h - k + 1, w - k + 1);
    let p = ho * wo;
    for ch in 0..c {
        let plane = &mut dx[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &cols[((ch * k + ki) * k + kj) * p..][..p];
                for oy in 0..ho {
                    let dst = &mut plane[(oy + ki) * w + kj..][..wo];
                    for (d, s) in dst.iter_mut().zip(&row[oy * wo..(oy + 1) * wo]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// `c = a * b + beta * c` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: strides describe matrices fully inside the given slices; the
    // output is a dense row-major m x n block of `c`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Stride-1 cross-correlation without padding, plus a per-filter bias.
pub fn conv2d_valid(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (f, k) = check_conv(input, weights, bias)?;
    let (n, c, h, w) = input.dims4()?;
    let (ho, wo) = (h - k + 1, w - k + 1);
    let (kk, p) = (c * k * k, ho * wo);
    let mut out = Tensor::zeros(&[n, f, ho, wo]);
    let mut cols = vec![0.0; kk * p];
    for s in 0..n {
        im2col(&input.data()[s * c * h * w..(s + 1) * c * h * w], c, h, w, k, &mut cols);
        let y = &mut out.data_mut()[s * f * p..(s + 1) * f * p];
        gemm(f, kk, p, weights.data(), (kk as isize, 1), &cols, (p as isize, 1), 0.0, y);
        for (row, b) in y.chunks_exact_mut(p).zip(bias.data()) {
            row.iter_mut().for_each(|v| *v += b);
        }
    }
    Ok(out)
}

pub fn conv2d_valid_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let (n, c, h, w) = input.dims4()?;
    let (f, _, k, _) = weights.dims4()?;
    let (ho, wo) = (h - k + 1, w - k + 1);
    if grad_out.shape() != [n, f, ho, wo] {
        return Err(Error::InvalidShape(format!(
            "conv grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            [n, f, ho, wo]
        )));
    }
    let (kk, p) = (c * k * k, ho * wo);
    let mut dx = Tensor::zeros(input.shape());
    let mut dw = Tensor::zeros(weights.shape());
    let mut db = Tensor::zeros(&[f]);
    let mut cols = vec![0.0; kk * p];
    let mut dcols = vec![0.0; kk * p];
    for s in 0..n {
        let dy = &grad_out.data()[s * f * p..(s + 1) * f * p];
        for (acc, row) in db.data_mut().iter_mut().zip(dy.chunks_exact(p)) {
            *acc += row.iter().sum::<f64>();
        }
        im2col(&input.data()[s * c * h * w..(s + 1) * c * h * w], c, h, w, k, &mut cols);
        // dW[F,K] += dY[F,P] * cols^T[P,K]
        gemm(f, p, kk, dy, (p as isize, 1), &cols, (1, p as isize), 1.0, dw.data_mut());
        // dcols[K,P] = W^T[K,F] * dY[F,P]
        gemm(kk, f, p, weights.data(), (1, kk as isize), dy, (p as isize, 1), 0.0, &mut dcols);
        col2im_add(&dcols, c, h, w, k, &mut dx.data_mut()[s * c * h * w..(s + 1) * c * h * w]);
    }
    Ok(ConvGrads {
        input: dx,
        weights: dw,
        bias: db,
    })
}

/// Reflect-101 source index: the edge sample is not repeated.
#[inline]
fn reflect(i: isize, len: usize) -> usize {
    let last = len as isize - 1;
    let r = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    r as usize
}

fn check_pad(h: usize, w: usize, pad: usize) -> Result<()> {
    if pad >= h || pad >= w {
        return Err(Error::PadTooLarge {
            pad,
            height: h,
            width: w,
        });
    }
    Ok(())
}

/// Mirror padding excluding the border row/column; corners reflect in both axes.
pub fn reflect_pad(input: &Tensor, pad: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    check_pad(h, w, pad)?;
    let (hp, wp) = (h + 2 * pad, w + 2 * pad);
    let mut out = Tensor::zeros(&[n, c, hp, wp]);
    let cols: Vec<usize> = (0..wp)
        .map(|j| reflect(j as isize - pad as isize, w))
        .collect();
    for (src, dst) in input
        .data()
        .chunks_exact(h * w)
        .zip(out.data_mut().chunks_exact_mut(hp * wp))
    {
        for i in 0..hp {
            let si = reflect(i as isize - pad as isize, h);
            let srow = &src[si * w..(si + 1) * w];
            for (d, &sj) in dst[i * wp..(i + 1) * wp].iter_mut().zip(&cols) {
                *d = srow[sj];
            }
        }
    }
    Ok(out)
}

/// Routes every padded position's gradient back to its source pixel.
pub fn reflect_pad_backward(grad_out: &Tensor, pad: usize) -> Result<Tensor> {
    let (n, c, hp, wp) = grad_out.dims4()?;
    if hp <= 2 * pad || wp <= 2 * pad {
        return Err(Error::InvalidShape(format!(
            "padded gradient {hp}x{wp} too small for pad {pad}"
        )));
    }
    let (h, w) = (hp - 2 * pad, wp - 2 * pad);
    check_pad(h, w, pad)?;
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    let cols: Vec<usize> = (0..wp)
        .map(|j| reflect(j as isize - pad as isize, w))
        .collect();
    for (g, d) in grad_out
        .data()
        .chunks_exact(hp * wp)
        .zip(dx.data_mut().chunks_exact_mut(h * w))
    {
        for i in 0..hp {
            let si = reflect(i as isize - pad as isize, h);
            for (gv, &sj) in g[i * wp..(i + 1) * wp].iter().zip(&cols) {
                d[si * w + sj] += gv;
            }
        }
    }
    Ok(dx)
}

/// Values kept from a Train-mode batch-norm forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Tensor,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

fn per_channel<'a>(
    data: &'a [f64],
    c: usize,
    plane: usize,
    ch: usize,
) -> impl Iterator<Item = &'a [f64]> + 'a {
    data.chunks_exact(plane).skip(ch).step_by(c)
}

fn check_affine(input: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(usize, usize, usize)> {
    let (n, c, h, w) = input.dims4()?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::InvalidShape(format!(
            "batch norm over {c} channels got gamma {:?}, beta {:?}",
            gamma.shape(),
            beta.shape()
        )));
    }
    Ok((n, c, h * w))
}

/// Normalizes with batch statistics taken over the N, H, W axes.
pub fn batch_norm_train(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, BatchNormCache)> {
    let (n, c, plane) = check_affine(input, gamma, beta)?;
    let count = (n * plane) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let m = per_channel(input.data(), c, plane, ch)
            .flatten()
            .sum::<f64>()
            / count;
        let v = per_channel(input.data(), c, plane, ch)
            .flatten()
            .map(|x| (x - m) * (x - m))
            .sum::<f64>()
            / count;
        mean[ch] = m;
        var[ch] = v;
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut normalized = Tensor::zeros(input.shape());
    let mut out = Tensor::zeros(input.shape());
    for (i, ((x, xh), y)) in input
        .data()
        .chunks_exact(plane)
        .zip(normalized.data_mut().chunks_exact_mut(plane))
        .zip(out.data_mut().chunks_exact_mut(plane))
        .enumerate()
    {
        let ch = i % c;
        let (g, b) = (gamma.data()[ch], beta.data()[ch]);
        for ((xv, xhv), yv) in x.iter().zip(xh.iter_mut()).zip(y.iter_mut()) {
            *xhv = (xv - mean[ch]) * inv_std[ch];
            *yv = g * *xhv + b;
        }
    }
    Ok((
        out,
        BatchNormCache {
            normalized,
            inv_std,
            mean,
            var,
        },
    ))
}

/// Normalizes with the supplied running statistics.
pub fn batch_norm_eval(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &[f64],
    running_var: &[f64],
    eps: f64,
) -> Result<Tensor> {
    let (_, c, plane) = check_affine(input, gamma, beta)?;
    let mut out = Tensor::zeros(input.shape());
    for (i, (x, y)) in input
        .data()
        .chunks_exact(plane)
        .zip(out.data_mut().chunks_exact_mut(plane))
        .enumerate()
    {
        let ch = i % c;
        let scale = gamma.data()[ch] / (running_var[ch] + eps).sqrt();
        let shift = beta.data()[ch] - running_mean[ch] * scale;
        for (xv, yv) in x.iter().zip(y.iter_mut()) {
            *yv = xv * scale + shift;
        }
    }
    Ok(out)
}

/// Returns `(d_input, d_gamma, d_beta)`.
pub fn batch_norm_backward(
    grad_out: &Tensor,
    cache: &BatchNormCache,
    gamma: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    if grad_out.shape() != cache.normalized.shape() {
        return Err(Error::InvalidShape(format!(
            "batch norm grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            cache.normalized.shape()
        )));
    }
    let (n, c, h, w) = grad_out.dims4()?;
    let plane = h * w;
    let count = (n * plane) as f64;
    let mut dgamma = Tensor::zeros(&[c]);
    let mut dbeta = Tensor::zeros(&[c]);
    for (i, (dy, xh)) in grad_out
        .data()
        .chunks_exact(plane)
        .zip(cache.normalized.data().chunks_exact(plane))
        .enumerate()
    {
        let ch = i % c;
        dbeta.data_mut()[ch] += dy.iter().sum::<f64>();
        dgamma.data_mut()[ch] += dy.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>();
    }
    let mut dx = Tensor::zeros(grad_out.shape());
    for (i, ((dy, xh), d)) in grad_out
        .data()
        .chunks_exact(plane)
        .zip(cache.normalized.data().chunks_exact(plane))
        .zip(dx.data_mut().chunks_exact_mut(plane))
        .enumerate()
    {
        let ch = i % c;
        let g = gamma.data()[ch];
        let sum_dxh = g * dbeta.data()[ch];
        let sum_dxh_xh = g * dgamma.data()[ch];
        let k = cache.inv_std[ch] / count;
        for ((dyv, xhv), dv) in dy.iter().zip(xh).zip(d.iter_mut()) {
            *dv = k * (count * g * dyv - sum_dxh - xhv * sum_dxh_xh);
        }
    }
    Ok((dx, dgamma, dbeta))
}

pub fn relu(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&x| x.max(0.0)).collect();
    Tensor::new(input.shape(), data).expect("shape preserved")
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::InvalidShape(format!(
            "relu grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape(), data)
}

/// Mean squared error over all elements and its gradient w.r.t. `denoised`.
pub fn mse_loss(denoised: &Tensor, clean: &Tensor) -> Result<(f64, Tensor)> {
    if denoised.shape() != clean.shape() {
        return Err(Error::InvalidShape(format!(
            "mse between {:?} and {:?}",
            denoised.shape(),
            clean.shape()
        )));
    }
    let count = denoised.len() as f64;
    let mut grad = Vec::with_capacity(denoised.len());
    let mut sum = 0.0;
    for (d, o) in denoised.data().iter().zip(clean.data()) {
        let diff = d - o;
        sum += diff * diff;
        grad.push(2.0 * diff / count);
    }
    Ok((sum / count, Tensor::new(denoised.shape(), grad)?))
}
