//! Hypercube data model: an `H × W × B` stack of spectral intensity planes.
//!
//! The in-memory layout is always canonical `(row, column, band)` so that a
//! pixel's spectrum is a contiguous slice. File interleaves (BSQ/BIL/BIP) are
//! converted on load and store, see [`envi`].

pub mod envi;
pub mod ppm;

use thiserror::Error;

pub use envi::{read_cube, write_cube, CubeFormat, CubeHeader, DataType, Interleave};

/// Wavelengths used to synthesise the pseudo-RGB input (red, green, blue).
pub const PSEUDO_RGB_NM: [f64; 3] = [600.0, 549.0, 450.0];

/// Label bands retained for reconstruction training.
pub const LABEL_BANDS_NM: [f64; 10] = [
    520.0, 583.0, 619.0, 655.0, 700.0, 739.0, 780.0, 837.0, 870.0, 903.0,
];

#[derive(Debug, Error)]
pub enum HypercubeError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("raw file holds {actual} bytes, header implies {expected}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("unsupported data type: {0}")]
    UnsupportedDataType(String),
    #[error("value {value} cannot be stored as {data_type}")]
    UnrepresentableValue { value: f32, data_type: &'static str },
    #[error("io failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid cube: {0}")]
    InvalidCube(String),
    #[error("targets {first} nm and {second} nm both map to source band {band}")]
    DuplicateMatch { first: f64, second: f64, band: usize },
    #[error("band selection needs at least one target wavelength")]
    EmptyTargets,
    #[error("cube values must lie in [0, 1]; normalize first")]
    NotNormalized,
    #[error("cube is constant; cannot min-max normalize")]
    ConstantCube,
}

pub type Result<T> = std::result::Result<T, HypercubeError>;

/// A hyperspectral image in canonical `(H, W, B)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypercube {
    height: usize,
    width: usize,
    wavelengths: Vec<f64>,
    data: Vec<f32>,
    source_range: Option<(f32, f32)>,
}

impl Hypercube {
    pub fn new(height: usize, width: usize, wavelengths: Vec<f64>, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || wavelengths.is_empty() {
            return Err(HypercubeError::InvalidCube(format!(
                "dimensions must be positive, got {height}x{width}x{}",
                wavelengths.len()
            )));
        }
        if !wavelengths.iter().all(|w| w.is_finite()) {
            return Err(HypercubeError::InvalidCube("non-finite wavelength".into()));
        }
        if wavelengths.windows(2).any(|p| p[1] <= p[0]) {
            return Err(HypercubeError::InvalidCube(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        let expected = height * width * wavelengths.len();
        if data.len() != expected {
            return Err(HypercubeError::InvalidCube(format!(
                "data length {} != {height}*{width}*{}",
                data.len(),
                wavelengths.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(HypercubeError::InvalidCube(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            height,
            width,
            wavelengths,
            data,
            source_range: None,
        })
    }

    /// Builds a cube from band-major planes (`planes[b][h * W + w]`).
    pub fn from_planes(
        height: usize,
        width: usize,
        wavelengths: Vec<f64>,
        planes: &[Vec<f32>],
    ) -> Result<Self> {
        let bands = planes.len();
        if planes.iter().any(|p| p.len() != height * width) {
            return Err(HypercubeError::InvalidCube("plane size mismatch".into()));
        }
        let mut data = vec![0.0f32; height * width * bands];
        for (b, plane) in planes.iter().enumerate() {
            for (px, &v) in plane.iter().enumerate() {
                data[px * bands + b] = v;
            }
        }
        Self::new(height, width, wavelengths, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Range of the raw values before [`Hypercube::normalize`] was applied.
    pub fn source_range(&self) -> Option<(f32, f32)> {
        self.source_range
    }

    pub(crate) fn with_source_range(mut self, range: Option<(f32, f32)>) -> Self {
        self.source_range = range;
        self
    }

    pub fn value_range(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f32 {
        self.data[(row * self.width + col) * self.bands() + band]
    }

    /// Spectrum of one pixel.
    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let b = self.bands();
        let start = (row * self.width + col) * b;
        &self.data[start..start + b]
    }

    /// One spectral plane in row-major order.
    pub fn band_plane(&self, band: usize) -> Vec<f32> {
        let b = self.bands();
        self.data.iter().skip(band).step_by(b).copied().collect()
    }

    /// Band-major copy of the data (`[b][h][w]`), the layout the networks consume.
    pub fn to_planar(&self) -> Vec<f32> {
        let b = self.bands();
        let hw = self.height * self.width;
        let mut out = vec![0.0f32; hw * b];
        for px in 0..hw {
            for band in 0..b {
                out[band * hw + px] = self.data[px * b + band];
            }
        }
        out
    }

    pub fn is_normalized(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Index of the band closest to `target_nm`; ties resolve to the lower index.
    pub fn nearest_band(&self, target_nm: f64) -> usize {
        nearest_index(&self.wavelengths, target_nm)
    }

    /// Keeps the source band nearest to each target wavelength. The result is
    /// ordered by wavelength, whatever the order of `targets`.
    pub fn select_bands(&self, targets: &[f64]) -> Result<Hypercube> {
        if targets.is_empty() {
            return Err(HypercubeError::EmptyTargets);
        }
        let mut picks: Vec<usize> = targets.iter().map(|&t| self.nearest_band(t)).collect();
        for i in 0..picks.len() {
            for j in 0..i {
                if picks[i] == picks[j] {
                    return Err(HypercubeError::DuplicateMatch {
                        first: targets[j],
                        second: targets[i],
                        band: picks[i],
                    });
                }
            }
        }
        picks.sort_unstable();
        let bands = self.bands();
        let mut data = Vec::with_capacity(self.height * self.width * picks.len());
        for px in self.data.chunks_exact(bands) {
            data.extend(picks.iter().map(|&b| px[b]));
        }
        let wavelengths: Vec<f64> = picks.iter().map(|&b| self.wavelengths[b]).collect();
        Ok(Hypercube::new(self.height, self.width, wavelengths, data)?
            .with_source_range(self.source_range))
    }

    /// Linear (no gamma) copy of the bands nearest 600/549/450 nm.
    pub fn pseudo_rgb(&self) -> Result<RgbImage> {
        if !self.is_normalized() {
            return Err(HypercubeError::NotNormalized);
        }
        let picks = PSEUDO_RGB_NM.map(|nm| self.nearest_band(nm));
        let bands = self.bands();
        let mut data = Vec::with_capacity(self.height * self.width * 3);
        for px in self.data.chunks_exact(bands) {
            data.extend(picks.iter().map(|&b| px[b]));
        }
        RgbImage::new(self.height, self.width, data)
    }

    /// Global min-max scaling of the whole cube to `[0, 1]`.
    pub fn normalize(&self) -> Result<Hypercube> {
        let (lo, hi) = self.value_range();
        if hi <= lo {
            return Err(HypercubeError::ConstantCube);
        }
        let (lo64, span) = (lo as f64, hi as f64 - lo as f64);
        let data = self
            .data
            .iter()
            .map(|&v| (((v as f64 - lo64) / span) as f32).clamp(0.0, 1.0))
            .collect();
        let range = self.source_range.or(Some((lo, hi)));
        Ok(Hypercube::new(self.height, self.width, self.wavelengths.clone(), data)?
            .with_source_range(range))
    }
}

/// Nearest-wavelength lookup shared by cubes and spectra tables.
pub fn nearest_index(wavelengths: &[f64], target_nm: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &w) in wavelengths.iter().enumerate() {
        let d = (w - target_nm).abs();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Three-channel image, canonical `(H, W, 3)` layout, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width * 3 {
            return Err(HypercubeError::InvalidCube(format!(
                "rgb image {height}x{width} with {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(HypercubeError::NotNormalized);
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    /// Channel-major copy (`[c][h][w]`).
    pub fn to_planar(&self) -> Vec<f32> {
        let hw = self.height * self.width;
        let mut out = vec![0.0f32; hw * 3];
        for px in 0..hw {
            for c in 0..3 {
                out[c * hw + px] = self.data[px * 3 + c];
            }
        }
        out
    }
}
