use super::dataset::{chw_to_hwc, hwc_to_chw};
use crate::data::HsiCube;
use crate::error::{Error, Result};
use crate::nn::{Mode, Network};
use crate::parallel::map_indexed;
use crate::tensor::Tensor;

const TILES_PER_BATCH: usize = 16;

/// Tile origins covering `len` with tiles of `tile` and stride
/// `tile - overlap`; the last tile is flush with the end.
pub fn tile_starts(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    let tile = tile.min(len);
    let step = tile.saturating_sub(overlap).max(1);
    let mut starts = Vec::new();
    let mut pos = 0;
    loop {
        if pos + tile >= len {
            starts.push(len - tile);
            break;
        }
        starts.push(pos);
        pos += step;
    }
    starts.dedup();
    starts
}

/// Runs the whole cube through `model` tile by tile in Eval mode and
/// averages overlapping predictions.
pub fn denoise_cube(model: &Network, noisy: &HsiCube, tile: usize, overlap: usize) -> Result<HsiCube> {
    let (h, w, c) = noisy.dims();
    if model.in_channels() != Some(c) {
        return Err(Error::InvalidShape(format!(
            "model expects {:?} channels, cube has {c}",
            model.in_channels()
        )));
    }
    if tile < model.max_kernel_size() {
        return Err(Error::InvalidParameter(format!(
            "tile {tile} smaller than the largest kernel {}",
            model.max_kernel_size()
        )));
    }
    if overlap >= tile {
        return Err(Error::InvalidParameter(format!("overlap {overlap} must be < tile {tile}")));
    }
    let (th, tw) = (tile.min(h), tile.min(w));
    let tiles: Vec<(usize, usize)> = tile_starts(h, tile, overlap)
        .into_iter()
        .flat_map(|r| tile_starts(w, tile, overlap).into_iter().map(move |col| (r, col)))
        .collect();

    let cut = |r: usize, col: usize| {
        let mut hwc = Vec::with_capacity(th * tw * c);
        for y in r..r + th {
            hwc.extend_from_slice(&noisy.data()[(y * w + col) * c..(y * w + col + tw) * c]);
        }
        hwc_to_chw(&hwc, th, tw, c)
    };
    let chunks: Vec<&[(usize, usize)]> = tiles.chunks(TILES_PER_BATCH).collect();
    let outputs: Vec<Result<Vec<f64>>> = map_indexed(chunks.len(), |i| {
        let chunk = chunks[i];
        let data: Vec<f64> = chunk.iter().flat_map(|&(r, col)| cut(r, col)).collect();
        let x = Tensor::new(&[chunk.len(), c, th, tw], data)?;
        let mut net = model.clone();
        net.set_mode(Mode::Eval);
        Ok(net.forward(&x)?.into_data())
    });

    let mut sum = vec![0.0; h * w * c];
    let mut hits = vec![0u32; h * w];
    for (chunk, out) in chunks.iter().zip(outputs) {
        let out = out?;
        for (k, &(r, col)) in chunk.iter().enumerate() {
            let hwc = chw_to_hwc(&out[k * c * th * tw..(k + 1) * c * th * tw], th, tw, c);
            for y in 0..th {
                for x in 0..tw {
                    let p = (r + y) * w + col + x;
                    hits[p] += 1;
                    let src = &hwc[(y * tw + x) * c..][..c];
                    for (d, s) in sum[p * c..(p + 1) * c].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
    for (p, px) in sum.chunks_exact_mut(c).enumerate() {
        let n = hits[p] as f64;
        px.iter_mut().for_each(|v| *v /= n);
    }
    HsiCube::new(h, w, c, sum, noisy.value_range())
}
