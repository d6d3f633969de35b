//! Deterministic synthetic egg phantoms.
//!
//! Each sample is an ellipse on a dark background. Every pixel's spectrum is
//! `Σ a_k φ_k(λ)` over three fixed Gaussian bases, so the pseudo-RGB bands
//! are a fixed full-rank linear mix `M · a` of the coefficients and the
//! RGB → spectrum map is exactly linear. Dead samples shift `a_2` down.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercube::{Hypercube, HypercubeError, RgbImage, PSEUDO_RGB_NM};
use crate::segmentation::Mask;

/// `(center nm, width nm)` of the three spectral bases.
pub const BASES: [(f64, f64); 3] = [(450.0, 50.0), (570.0, 45.0), (760.0, 140.0)];
pub const LIVE_MEAN: [f64; 3] = [0.40, 0.50, 0.45];
pub const COEF_SD: f64 = 0.05;
pub const DEAD_SHIFT: f64 = -0.10;
pub const BACKGROUND: [f64; 3] = [0.02, 0.02, 0.012];
/// Brightness at the rim relative to the center is `1 - FALLOFF`.
pub const FALLOFF: f64 = 0.3;
const COEF_FLOOR: f64 = 0.05;
const VALUE_RANGE: (f32, f32) = (1e-3, 1.0);

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("invalid phantom config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Hypercube(#[from] HypercubeError),
}

pub type Result<T> = std::result::Result<T, PhantomError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub n_samples: usize,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub wl_min: f64,
    pub wl_max: f64,
    pub dead_fraction: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            n_samples: 102,
            height: 64,
            width: 72,
            bands: 31,
            wl_min: 400.0,
            wl_max: 1000.0,
            dead_fraction: 0.09,
            noise_sigma: 0.01,
            seed: 42,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PhantomError::InvalidConfig(m));
        if !(self.dead_fraction > 0.0 && self.dead_fraction <= 0.5) {
            return bad(format!("dead_fraction {} outside (0, 0.5]", self.dead_fraction));
        }
        if self.bands < 10 {
            return bad(format!("bands {} below 10", self.bands));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be a finite non-negative number", self.noise_sigma));
        }
        if self.n_samples < 2 {
            return bad("n_samples must be at least 2".into());
        }
        if self.height < 16 || self.width < 16 {
            return bad(format!("image {}x{} smaller than 16x16", self.height, self.width));
        }
        if !(self.wl_min < self.wl_max) || self.wl_min <= 0.0 {
            return bad(format!("wavelength range {}..{} nm", self.wl_min, self.wl_max));
        }
        Ok(())
    }

    /// Evenly spaced band centers from `wl_min` to `wl_max` inclusive.
    pub fn wavelengths(&self) -> Vec<f64> {
        let step = (self.wl_max - self.wl_min) / (self.bands - 1) as f64;
        (0..self.bands).map(|i| self.wl_min + step * i as f64).collect()
    }

    /// Number of dead samples: `round(n · dead_fraction)`, at least one.
    pub fn n_dead(&self) -> usize {
        ((self.n_samples as f64 * self.dead_fraction).round() as usize).clamp(1, self.n_samples - 1)
    }

    /// Per-sample labels (1 = dead), drawn as a seeded subset of fixed size.
    pub fn labels(&self) -> Vec<u8> {
        let mut order: Vec<usize> = (0..self.n_samples).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut labels = vec![0u8; self.n_samples];
        for &i in &order[..self.n_dead()] {
            labels[i] = 1;
        }
        labels
    }
}

pub fn basis(k: usize, nm: f64) -> f64 {
    let (c, w) = BASES[k];
    (-(nm - c).powi(2) / (2.0 * w * w)).exp()
}

pub fn spectrum(a: [f64; 3], nm: f64) -> f64 {
    (0..3).map(|k| a[k] * basis(k, nm)).sum()
}

/// Rows are the pseudo-RGB channels, columns the basis coefficients.
pub fn mixing_matrix(wavelengths: &[f64]) -> [[f64; 3]; 3] {
    let picks = PSEUDO_RGB_NM.map(|nm| wavelengths[crate::hypercube::nearest_index(wavelengths, nm)]);
    picks.map(|nm| [basis(0, nm), basis(1, nm), basis(2, nm)])
}

/// Geometry of the egg outline, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cy: f64,
    pub cx: f64,
    pub ry: f64,
    pub rx: f64,
    pub angle: f64,
}

impl Ellipse {
    /// Squared normalized radius of the pixel center `(row, col)`.
    pub fn r2(&self, row: usize, col: usize) -> f64 {
        let (dy, dx) = (row as f64 + 0.5 - self.cy, col as f64 + 0.5 - self.cx);
        let (s, c) = self.angle.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.rx).powi(2) + (v / self.ry).powi(2)
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub sample_id: String,
    pub label: u8,
    pub coefficients: [f64; 3],
    pub ellipse: Ellipse,
    pub mask: Mask,
    pub cube: Hypercube,
    pub rgb: RgbImage,
}

pub fn sample_id(i: usize) -> String {
    format!("egg_{i:03}")
}

/// Sample `i` of the dataset; independent of every other sample.
pub fn generate_sample(cfg: &PhantomConfig, i: usize, label: u8) -> Result<Phantom> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64 + 1);
    let coef = Normal::new(0.0, COEF_SD).expect("positive sd");
    let mut a = LIVE_MEAN;
    if label == 1 {
        a[1] += DEAD_SHIFT;
    }
    for v in &mut a {
        *v = (*v + coef.sample(&mut rng)).max(COEF_FLOOR);
    }
    let (h, w) = (cfg.height as f64, cfg.width as f64);
    let ellipse = Ellipse {
        cy: h / 2.0 + rng.random_range(-0.05..0.05) * h,
        cx: w / 2.0 + rng.random_range(-0.05..0.05) * w,
        ry: rng.random_range(0.28..0.37) * h,
        rx: rng.random_range(0.30..0.38) * w,
        angle: rng.random_range(-0.25..0.25),
    };
    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).expect("positive sd");
    let wavelengths = cfg.wavelengths();
    let phi: Vec<[f64; 3]> = wavelengths.iter().map(|&nm| [basis(0, nm), basis(1, nm), basis(2, nm)]).collect();
    let mut bits = Vec::with_capacity(cfg.height * cfg.width);
    let mut data = Vec::with_capacity(cfg.height * cfg.width * cfg.bands);
    for row in 0..cfg.height {
        for col in 0..cfg.width {
            let r2 = ellipse.r2(row, col);
            let inside = r2 <= 1.0;
            bits.push(inside);
            let base = if inside { a.map(|v| v * (1.0 - FALLOFF * r2)) } else { BACKGROUND };
            let mut px = base;
            if cfg.noise_sigma > 0.0 {
                for v in &mut px {
                    *v *= 1.0 + noise.sample(&mut rng);
                }
            }
            for p in &phi {
                let s = px[0] * p[0] + px[1] * p[1] + px[2] * p[2];
                data.push((s as f32).clamp(VALUE_RANGE.0, VALUE_RANGE.1));
            }
        }
    }
    let cube = Hypercube::new(cfg.height, cfg.width, wavelengths, data)?;
    let rgb = cube.pseudo_rgb()?;
    Ok(Phantom {
        sample_id: sample_id(i),
        label,
        coefficients: a,
        ellipse,
        mask: Mask::new(cfg.height, cfg.width, bits),
        cube,
        rgb,
    })
}

/// All samples in index order.
pub fn generate(cfg: &PhantomConfig) -> Result<Vec<Phantom>> {
    cfg.validate()?;
    cfg.labels()
        .into_iter()
        .enumerate()
        .map(|(i, label)| generate_sample(cfg, i, label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{threshold_mask, DEFAULT_REF_NM, DEFAULT_THRESHOLD};

    fn small() -> PhantomConfig {
        PhantomConfig {
            n_samples: 12,
            ..PhantomConfig::default()
        }
    }

    fn det3(m: [[f64; 3]; 3]) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[test]
    fn default_shape() {
        let cfg = PhantomConfig::default();
        let wl = cfg.wavelengths();
        assert_eq!(wl.len(), 31);
        assert_eq!((wl[0], wl[1], wl[30]), (400.0, 420.0, 1000.0));
        assert_eq!(cfg.n_dead(), 9);
        assert_eq!(cfg.labels().iter().filter(|&&l| l == 1).count(), 9);
    }

    #[test]
    fn mixing_matrix_full_rank() {
        let m = mixing_matrix(&PhantomConfig::default().wavelengths());
        assert!(det3(m).abs() > 1e-2, "det {}", det3(m));
    }

    #[test]
    fn background_below_threshold_at_700() {
        assert!(spectrum(BACKGROUND, 700.0) * 1.05 < DEFAULT_THRESHOLD as f64);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            PhantomConfig { dead_fraction: 0.0, ..small() },
            PhantomConfig { dead_fraction: 0.6, ..small() },
            PhantomConfig { bands: 9, ..small() },
            PhantomConfig { noise_sigma: -1.0, ..small() },
        ] {
            assert!(matches!(generate(&cfg), Err(PhantomError::InvalidConfig(_))));
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_sample(&small(), 3, 0).unwrap();
        let b = generate_sample(&small(), 3, 0).unwrap();
        assert_eq!(a.cube, b.cube);
        assert_eq!(a.rgb, b.rgb);
        let c = generate_sample(&small(), 4, 0).unwrap();
        assert_ne!(a.cube, c.cube);
    }

    #[test]
    fn values_in_range_and_rgb_is_band_copy() {
        for p in generate(&small()).unwrap() {
            assert!(p.cube.data().iter().all(|&v| (1e-3..=1.0).contains(&v)));
            let picks = PSEUDO_RGB_NM.map(|nm| p.cube.nearest_band(nm));
            for (px, rgb) in p.cube.data().chunks_exact(31).zip(p.rgb.data().chunks_exact(3)) {
                for c in 0..3 {
                    assert_eq!(rgb[c], px[picks[c]]);
                }
            }
        }
    }

    #[test]
    fn noiseless_pixels_match_basis_mix() {
        let cfg = PhantomConfig { noise_sigma: 0.0, ..small() };
        let p = generate_sample(&cfg, 0, 0).unwrap();
        let wl = cfg.wavelengths();
        for row in 0..cfg.height {
            for col in 0..cfg.width {
                let r2 = p.ellipse.r2(row, col);
                let a = if r2 <= 1.0 { p.coefficients.map(|v| v * (1.0 - FALLOFF * r2)) } else { BACKGROUND };
                for (b, &nm) in wl.iter().enumerate() {
                    let expect = spectrum(a, nm) as f32;
                    assert!((p.cube.get(row, col, b) - expect).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn threshold_recovers_ground_truth_mask() {
        for p in generate(&small()).unwrap() {
            let m = threshold_mask(&p.cube, DEFAULT_REF_NM, DEFAULT_THRESHOLD).unwrap();
            assert_eq!(m, p.mask, "{}", p.sample_id);
        }
    }

    #[test]
    fn ellipse_inside_frame() {
        for p in generate(&PhantomConfig::default()).unwrap() {
            let (h, w) = (p.mask.height(), p.mask.width());
            for row in [0, h - 1] {
                assert!((0..w).all(|c| !p.mask.get(row, c)));
            }
            for col in [0, w - 1] {
                assert!((0..h).all(|r| !p.mask.get(r, col)));
            }
        }
    }

    #[test]
    fn classes_separate_at_a2_peak() {
        let cfg = PhantomConfig::default();
        let phantoms = generate(&cfg).unwrap();
        let band = phantoms[0].cube.nearest_band(BASES[1].0);
        let class_mean = |label: u8| {
            let vals: Vec<f64> = phantoms
                .iter()
                .filter(|p| p.label == label)
                .map(|p| {
                    let idx: Vec<usize> = (0..p.mask.bits().len()).filter(|&i| p.mask.bits()[i]).collect();
                    idx.iter().map(|&i| p.cube.data()[i * cfg.bands + band] as f64).sum::<f64>() / idx.len() as f64
                })
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let gap = class_mean(0) - class_mean(1);
        assert!(gap > 5.0 * cfg.noise_sigma, "gap {gap}");
    }
}
