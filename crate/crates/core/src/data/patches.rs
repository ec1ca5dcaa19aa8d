//! Patch extraction on a regular grid and random dataset splits.

use rand::seq::SliceRandom;
use rand::Rng;

use super::cube::HsiCube;
use crate::error::{Error, Result};

/// An aligned clean/noisy pair, each `S x S x C` with bands innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub source: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub size: usize,
    pub channels: usize,
    pub value_range: (f64, f64),
    pub patches: Vec<Patch>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    fn with_patches(&self, patches: Vec<Patch>) -> PatchSet {
        PatchSet {
            size: self.size,
            channels: self.channels,
            value_range: self.value_range,
            patches,
        }
    }

    /// Appends another set of the same geometry.
    pub fn extend(&mut self, other: PatchSet) -> Result<()> {
        if other.size != self.size || other.channels != self.channels {
            return Err(Error::InvalidShape(format!(
                "cannot merge {}x{}x{} patches into {}x{}x{}",
                other.size, other.size, other.channels, self.size, self.size, self.channels
            )));
        }
        self.patches.extend(other.patches);
        Ok(())
    }

    pub fn clean_cube(&self, i: usize) -> HsiCube {
        self.cube_of(&self.patches[i].clean)
    }

    pub fn noisy_cube(&self, i: usize) -> HsiCube {
        self.cube_of(&self.patches[i].noisy)
    }

    pub fn cube_of(&self, data: &[f64]) -> HsiCube {
        HsiCube::new(self.size, self.size, self.channels, data.to_vec(), self.value_range)
            .expect("patch geometry is consistent")
    }
}

/// Top-left corners of every `size x size` window at multiples of `stride`.
pub fn patch_grid(height: usize, width: usize, size: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    check_geometry(height, width, size, stride)?;
    let rows = (0..=height - size).step_by(stride);
    Ok(rows
        .flat_map(|r| (0..=width - size).step_by(stride).map(move |c| (r, c)))
        .collect())
}

fn check_geometry(height: usize, width: usize, size: usize, stride: usize) -> Result<()> {
    if stride == 0 || size == 0 {
        return Err(Error::InvalidParameter("patch size and stride must be >= 1".into()));
    }
    if size > height || size > width {
        return Err(Error::InvalidParameter(format!(
            "patch size {size} exceeds cube {height}x{width}"
        )));
    }
    Ok(())
}

/// `(floor((H-S)/t)+1) * (floor((W-S)/t)+1)`.
pub fn patch_count(height: usize, width: usize, size: usize, stride: usize) -> Result<usize> {
    check_geometry(height, width, size, stride)?;
    Ok(((height - size) / stride + 1) * ((width - size) / stride + 1))
}

pub fn extract_patches(clean: &HsiCube, noisy: &HsiCube, size: usize, stride: usize) -> Result<PatchSet> {
    if !clean.same_shape(noisy) {
        return Err(Error::InvalidShape(format!(
            "clean {:?} and noisy {:?} cubes are not aligned",
            clean.dims(),
            noisy.dims()
        )));
    }
    let (h, w, c) = clean.dims();
    let grid = patch_grid(h, w, size, stride)?;
    let cut = |cube: &HsiCube, r: usize, col: usize| {
        let mut out = Vec::with_capacity(size * size * c);
        for y in r..r + size {
            out.extend_from_slice(&cube.data()[(y * w + col) * c..(y * w + col + size) * c]);
        }
        out
    };
    let patches = grid
        .into_iter()
        .map(|(r, col)| Patch {
            clean: cut(clean, r, col),
            noisy: cut(noisy, r, col),
            source: 0,
            row: r,
            col,
        })
        .collect();
    Ok(PatchSet {
        size,
        channels: c,
        value_range: clean.value_range(),
        patches,
    })
}

/// Split sizes: eval and test round to nearest, train takes the rest.
pub fn split_sizes(n: usize, fractions: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "split fractions {fractions:?} must be positive and sum to 1"
        )));
    }
    let eval = ((b * n as f64).round() as usize).min(n);
    let test = ((c * n as f64).round() as usize).min(n - eval);
    Ok((n - eval - test, eval, test))
}

/// Uniform random partition into (train, eval, test).
pub fn split_patches<R: Rng + ?Sized>(
    ps: &PatchSet,
    fractions: (f64, f64, f64),
    rng: &mut R,
) -> Result<(PatchSet, PatchSet, PatchSet)> {
    let (n_train, n_eval, _) = split_sizes(ps.len(), fractions)?;
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.shuffle(rng);
    let take = |idx: &[usize]| ps.with_patches(idx.iter().map(|&i| ps.patches[i].clone()).collect());
    Ok((
        take(&order[..n_train]),
        take(&order[n_train..n_train + n_eval]),
        take(&order[n_train + n_eval..]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn ramp(h: usize, w: usize, c: usize) -> HsiCube {
        HsiCube::new(h, w, c, (0..h * w * c).map(|i| i as f64).collect(), (0.0, 1.0)).unwrap()
    }

    #[test]
    fn small_geometries() {
        let cube = ramp(4, 4, 2);
        assert_eq!(extract_patches(&cube, &cube, 3, 1).unwrap().len(), 4);
        assert_eq!(extract_patches(&cube, &cube, 4, 3).unwrap().len(), 1);
        assert!(extract_patches(&cube, &cube, 5, 1).is_err());
    }

    #[test]
    fn patch_content_and_channels() {
        let cube = ramp(5, 6, 3);
        let ps = extract_patches(&cube, &cube, 2, 2).unwrap();
        let p = &ps.patches[1];
        assert_eq!((p.row, p.col), (0, 2));
        assert_eq!(p.clean.len(), 2 * 2 * 3);
        assert_eq!(p.clean[0], cube.get(0, 2, 0));
        assert_eq!(p.clean[11], cube.get(1, 3, 2));
    }

    #[test]
    fn count_matches_enumeration() {
        for h in 1..20 {
            for w in 1..14 {
                for s in 1..=h.min(w) {
                    for t in 1..6 {
                        let brute = (0..h)
                            .flat_map(|r| (0..w).map(move |c| (r, c)))
                            .filter(|&(r, c)| r % t == 0 && c % t == 0 && r + s <= h && c + s <= w)
                            .count();
                        assert_eq!(patch_count(h, w, s, t).unwrap(), brute);
                        assert_eq!(patch_grid(h, w, s, t).unwrap().len(), brute);
                    }
                }
            }
        }
    }

    #[test]
    fn paper_split_rounding() {
        assert_eq!(
            split_sizes(26_373, (0.665, 0.152, 0.183)).unwrap(),
            (17_538, 4_009, 4_826)
        );
        assert!(split_sizes(10, (0.5, 0.5, 0.1)).is_err());
        assert!(split_sizes(10, (1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn split_partitions_and_replays() {
        let cube = ramp(12, 12, 1);
        let ps = extract_patches(&cube, &cube, 2, 1).unwrap();
        let (a, b, c) = split_patches(&ps, (0.665, 0.152, 0.183), &mut rng_from_seed(3)).unwrap();
        assert_eq!(a.len() + b.len() + c.len(), ps.len());
        let mut keys: Vec<_> = [&a, &b, &c]
            .iter()
            .flat_map(|s| s.patches.iter().map(|p| (p.row, p.col)))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), ps.len());
        let again = split_patches(&ps, (0.665, 0.152, 0.183), &mut rng_from_seed(3)).unwrap();
        assert_eq!(again, (a, b, c));
    }
}
