//! Band-averaged image quality metrics: MPSNR, MSSIM and ERGAS.
//!
//! Each band is scored independently (possibly in parallel) and the final
//! mean is a fixed-order sum over bands.

use serde::{Deserialize, Serialize};

use crate::data::HsiCube;
use crate::error::{Error, Result};
use crate::parallel::map_indexed;

pub const DEFAULT_PSNR_CAP: f64 = 100.0;
pub const DEFAULT_SSIM_WINDOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Reported PSNR for a band with zero error.
    pub psnr_cap: f64,
    pub ssim_window: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            psnr_cap: DEFAULT_PSNR_CAP,
            ssim_window: DEFAULT_SSIM_WINDOW,
        }
    }
}

fn check_pair(clean: &HsiCube, test: &HsiCube) -> Result<()> {
    if !clean.same_shape(test) {
        return Err(Error::InvalidShape(format!(
            "metric inputs differ in shape: {:?} vs {:?}",
            clean.dims(),
            test.dims()
        )));
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn band_mse(clean: &HsiCube, test: &HsiCube, band: usize) -> f64 {
    let c = clean.channels();
    let (sum, n) = clean
        .data()
        .iter()
        .skip(band)
        .step_by(c)
        .zip(test.data().iter().skip(band).step_by(c))
        .fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b) * (a - b), n + 1));
    sum / n as f64
}

/// Per-band PSNR in dB with peak = span of the clean cube's value range.
pub fn band_psnr(clean: &HsiCube, test: &HsiCube, cap: f64) -> Result<Vec<f64>> {
    check_pair(clean, test)?;
    let peak = clean.peak();
    Ok(map_indexed(clean.channels(), |b| {
        let mse = band_mse(clean, test, b);
        if mse == 0.0 {
            cap
        } else {
            10.0 * (peak * peak / mse).log10()
        }
    }))
}

pub fn mpsnr(clean: &HsiCube, test: &HsiCube) -> Result<f64> {
    mpsnr_with_cap(clean, test, DEFAULT_PSNR_CAP)
}

pub fn mpsnr_with_cap(clean: &HsiCube, test: &HsiCube, cap: f64) -> Result<f64> {
    Ok(mean(&band_psnr(clean, test, cap)?))
}

/// Sliding `win`-wide sums along rows, then along columns: returns the
/// `(H-win+1) x (W-win+1)` grid of window sums.
fn box_sums(plane: &[f64], h: usize, w: usize, win: usize) -> Vec<f64> {
    let wo = w - win + 1;
    let ho = h - win + 1;
    let mut rows = vec![0.0; h * wo];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..wo {
            rows[y * wo + x] = src[x..x + win].iter().sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            out[y * wo + x] = (y..y + win).map(|r| rows[r * wo + x]).sum();
        }
    }
    out
}

fn ssim_plane(x: &[f64], y: &[f64], h: usize, w: usize, win: usize, peak: f64) -> f64 {
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let sx = box_sums(x, h, w, win);
    let sy = box_sums(y, h, w, win);
    let sxx = box_sums(&prod(x, x), h, w, win);
    let syy = box_sums(&prod(y, y), h, w, win);
    let sxy = box_sums(&prod(x, y), h, w, win);
    let n = (win * win) as f64;
    let total: f64 = (0..sx.len())
        .map(|i| {
            let (mx, my) = (sx[i] / n, sy[i] / n);
            let vx = sxx[i] / n - mx * mx;
            let vy = syy[i] / n - my * my;
            let cxy = sxy[i] / n - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    total / sx.len() as f64
}

/// Per-band SSIM over all `window x window` windows at stride 1 with
/// uniform weights.
pub fn band_ssim(clean: &HsiCube, test: &HsiCube, window: usize) -> Result<Vec<f64>> {
    check_pair(clean, test)?;
    let (h, w, c) = clean.dims();
    if window == 0 || window > h || window > w {
        return Err(Error::InvalidParameter(format!(
            "SSIM window {window} does not fit a {h}x{w} image"
        )));
    }
    let peak = clean.peak();
    Ok(map_indexed(c, |b| {
        ssim_plane(&clean.band(b), &test.band(b), h, w, window, peak)
    }))
}

pub fn mssim(clean: &HsiCube, test: &HsiCube) -> Result<f64> {
    mssim_with_window(clean, test, DEFAULT_SSIM_WINDOW)
}

pub fn mssim_with_window(clean: &HsiCube, test: &HsiCube, window: usize) -> Result<f64> {
    Ok(mean(&band_ssim(clean, test, window)?))
}

/// Per-band `RMSE_b / mean_b` ratios; fails if any clean band has zero mean.
pub fn band_relative_rmse(clean: &HsiCube, test: &HsiCube) -> Result<Vec<f64>> {
    check_pair(clean, test)?;
    let c = clean.channels();
    let means: Vec<f64> = (0..c)
        .map(|b| mean(&clean.data().iter().skip(b).step_by(c).copied().collect::<Vec<_>>()))
        .collect();
    let degenerate: Vec<usize> = (0..c).filter(|&b| means[b] == 0.0).collect();
    if !degenerate.is_empty() {
        return Err(Error::DegenerateBands(degenerate));
    }
    Ok(map_indexed(c, |b| band_mse(clean, test, b).sqrt() / means[b]))
}

/// ERGAS with unit resolution ratio.
pub fn mergas(clean: &HsiCube, test: &HsiCube) -> Result<f64> {
    let ratios = band_relative_rmse(clean, test)?;
    let sq: Vec<f64> = ratios.iter().map(|r| r * r).collect();
    Ok(100.0 * mean(&sq).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mpsnr: f64,
    pub mssim: f64,
    pub mergas: f64,
    pub psnr_per_band: Vec<f64>,
    pub ssim_per_band: Vec<f64>,
    pub relative_rmse_per_band: Vec<f64>,
}

pub fn report(clean: &HsiCube, test: &HsiCube, cfg: &MetricConfig) -> Result<MetricsReport> {
    let psnr = band_psnr(clean, test, cfg.psnr_cap)?;
    let ssim = band_ssim(clean, test, cfg.ssim_window)?;
    let rel = band_relative_rmse(clean, test)?;
    let sq: Vec<f64> = rel.iter().map(|r| r * r).collect();
    Ok(MetricsReport {
        mpsnr: mean(&psnr),
        mssim: mean(&ssim),
        mergas: 100.0 * mean(&sq).sqrt(),
        psnr_per_band: psnr,
        ssim_per_band: ssim,
        relative_rmse_per_band: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(h: usize, w: usize, c: usize, f: impl Fn(usize) -> f64) -> HsiCube {
        HsiCube::new(h, w, c, (0..h * w * c).map(f).collect(), (0.0, 1.0)).unwrap()
    }

    #[test]
    fn identity_scores() {
        let a = cube(10, 9, 3, |i| 0.1 + ((i * 31) % 17) as f64 / 20.0);
        assert_eq!(mpsnr(&a, &a).unwrap(), 100.0);
        assert_eq!(mssim(&a, &a).unwrap(), 1.0);
        assert_eq!(mergas(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn uniform_error_gives_20_db() {
        let a = cube(4, 4, 3, |_| 0.5);
        let b = cube(4, 4, 3, |_| 0.6);
        assert!((mpsnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn ergas_by_hand() {
        // single band, mean 2, every error 0.2 -> RMSE 0.2
        let a = HsiCube::new(2, 2, 1, vec![1.5, 2.5, 1.5, 2.5], (0.0, 3.0)).unwrap();
        let b = HsiCube::new(2, 2, 1, vec![1.7, 2.3, 1.7, 2.3], (0.0, 3.0)).unwrap();
        assert!((mergas(&a, &b).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn zero_mean_band_is_reported() {
        let a = cube(2, 2, 3, |i| if i % 3 == 1 { 0.0 } else { 1.0 });
        match mergas(&a, &a) {
            Err(Error::DegenerateBands(b)) => assert_eq!(b, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_offset_ssim_closed_form() {
        // constant clean image: sigma terms vanish, SSIM = luminance term
        let (x, off) = (0.4, 0.1);
        let a = cube(8, 8, 1, |_| x);
        let b = cube(8, 8, 1, |_| x + off);
        let c1 = 0.01f64.powi(2);
        let y = x + off;
        let expected = (2.0 * x * y + c1) / (x * x + y * y + c1);
        assert!((mssim(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!(expected < 1.0);
    }

    #[test]
    fn window_must_fit() {
        let a = cube(5, 9, 1, |_| 0.1);
        assert!(mssim(&a, &a).is_err());
        assert!(mssim_with_window(&a, &a, 5).is_ok());
        assert!(mpsnr(&a, &cube(5, 8, 1, |_| 0.1)).is_err());
    }
}
