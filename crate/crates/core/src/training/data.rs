use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Result, TrainError};
use crate::autodiff::Tensor;
use crate::hypercube::{Hypercube, RgbImage};

/// An aligned RGB input and label cube, both stored channel-planar.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub id: String,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub rgb: Vec<f64>,
    pub target: Vec<f64>,
}

impl TrainingPair {
    pub fn new(id: &str, rgb: &RgbImage, cube: &Hypercube) -> Result<Self> {
        if (rgb.height(), rgb.width()) != (cube.height(), cube.width()) {
            return Err(TrainError::ShapeMismatch(format!(
                "{id}: rgb {}x{} vs cube {}x{}",
                rgb.height(),
                rgb.width(),
                cube.height(),
                cube.width()
            )));
        }
        Ok(Self {
            id: id.to_string(),
            height: cube.height(),
            width: cube.width(),
            bands: cube.bands(),
            rgb: rgb.to_planar().into_iter().map(f64::from).collect(),
            target: cube.to_planar().into_iter().map(f64::from).collect(),
        })
    }

    pub fn rgb_tensor(&self) -> Tensor {
        Tensor::new(self.rgb.clone(), &[3, self.height, self.width]).expect("consistent sizes")
    }

    pub fn target_tensor(&self) -> Tensor {
        Tensor::new(self.target.clone(), &[self.bands, self.height, self.width]).expect("consistent sizes")
    }

    /// The `size × size` window at `(row, col)` of both members.
    pub fn window(&self, row: usize, col: usize, size: usize) -> (Tensor, Tensor) {
        let cut = |planes: &[f64], channels: usize| {
            let mut out = Vec::with_capacity(channels * size * size);
            for c in 0..channels {
                for y in row..row + size {
                    let base = (c * self.height + y) * self.width + col;
                    out.extend_from_slice(&planes[base..base + size]);
                }
            }
            Tensor::new(out, &[channels, size, size]).expect("consistent sizes")
        };
        (cut(&self.rgb, 3), cut(&self.target, self.bands))
    }
}

/// Seeded shuffle, then `floor(0.1 n)` validation, `floor(0.1 n)` test and the rest training.
pub fn split_dataset<T: Clone>(items: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if items.len() < 10 {
        return Err(TrainError::TooFewItems(items.len()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = items.len() / 10;
    let pick = |r: &[usize]| r.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    let val = pick(&order[..n_hold]);
    let test = pick(&order[n_hold..2 * n_hold]);
    let train = pick(&order[2 * n_hold..]);
    Ok((train, val, test))
}

/// Top-left corners on the stride grid that keep the patch inside the image.
pub fn patch_corners(extent: usize, patch: usize, stride: usize) -> Result<Vec<usize>> {
    if patch == 0 || patch > extent {
        return Err(TrainError::PatchTooLarge { patch, extent });
    }
    Ok((0..=extent - patch).step_by(stride.max(1)).collect())
}

/// Draws a patch whose corner is uniform over the stride grid.
pub fn sample_patch(pair: &TrainingPair, patch: usize, stride: usize, rng: &mut impl Rng) -> Result<(usize, usize, Tensor, Tensor)> {
    let rows = patch_corners(pair.height, patch, stride)?;
    let cols = patch_corners(pair.width, patch, stride)?;
    let r = rows[rng.random_range(0..rows.len())];
    let c = cols[rng.random_range(0..cols.len())];
    let (x, y) = pair.window(r, c, patch);
    Ok((r, c, x, y))
}
