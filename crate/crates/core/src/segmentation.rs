//! Foreground masking at a reference band and ROI mean-spectrum extraction.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::hypercube::Hypercube;
use crate::provenance::Provenance;

pub const DEFAULT_REF_NM: f64 = 700.0;
pub const DEFAULT_THRESHOLD: f32 = 0.02;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("no pixel above threshold {threshold} at {ref_nm} nm")]
    EmptyMask { ref_nm: f64, threshold: f32 },
    #[error("cube values must lie in [0, 1] before masking")]
    NotNormalized,
    #[error("mask is {mask_h}x{mask_w} but cube is {cube_h}x{cube_w}")]
    DimensionMismatch {
        mask_h: usize,
        mask_w: usize,
        cube_h: usize,
        cube_w: usize,
    },
    #[error("spectra table: {0}")]
    Table(String),
    #[error("io failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SegmentationError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), height * width, "mask bit count");
        Self { height, width, bits }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iou(&self, other: &Mask) -> f64 {
        let inter = self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count();
        let union = self.bits.iter().zip(&other.bits).filter(|(a, b)| **a || **b).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Pixels whose intensity at the band nearest `ref_nm` is strictly above `threshold`.
pub fn threshold_mask(cube: &Hypercube, ref_nm: f64, threshold: f32) -> Result<Mask> {
    if !cube.is_normalized() {
        return Err(SegmentationError::NotNormalized);
    }
    let band = cube.nearest_band(ref_nm);
    let bits: Vec<bool> = cube
        .data()
        .chunks_exact(cube.bands())
        .map(|px| px[band] > threshold)
        .collect();
    let mask = Mask::new(cube.height(), cube.width(), bits);
    if mask.count() == 0 {
        return Err(SegmentationError::EmptyMask { ref_nm, threshold });
    }
    Ok(mask)
}

/// Keeps the largest 4-connected region. Equal-sized regions resolve to the
/// one containing the earliest pixel in row-major order.
pub fn largest_component(mask: &Mask) -> Mask {
    let (h, w) = (mask.height, mask.width);
    let mut label = vec![usize::MAX; h * w];
    let mut best: Option<(usize, usize)> = None; // (component id, size)
    let mut queue = VecDeque::new();
    let mut next_id = 0;
    for start in 0..h * w {
        if !mask.bits[start] || label[start] != usize::MAX {
            continue;
        }
        let id = next_id;
        next_id += 1;
        let mut size = 0;
        label[start] = id;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (r, c) = (p / w, p % w);
            let mut visit = |q: usize| {
                if mask.bits[q] && label[q] == usize::MAX {
                    label[q] = id;
                    queue.push_back(q);
                }
            };
            if r > 0 {
                visit(p - w);
            }
            if r + 1 < h {
                visit(p + w);
            }
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < w {
                visit(p + 1);
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((id, size));
        }
    }
    let bits = match best {
        Some((id, _)) => label.iter().map(|&l| l == id).collect(),
        None => mask.bits.clone(),
    };
    Mask::new(h, w, bits)
}

/// A single sample's spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub sample_id: String,
    pub label: Option<u8>,
    pub wavelengths: Vec<f64>,
    pub values: Vec<f64>,
}

/// Per-band mean over the masked pixels.
pub fn mean_spectrum(cube: &Hypercube, mask: &Mask, sample_id: &str, label: Option<u8>) -> Result<Spectrum> {
    if mask.height != cube.height() || mask.width != cube.width() {
        return Err(SegmentationError::DimensionMismatch {
            mask_h: mask.height,
            mask_w: mask.width,
            cube_h: cube.height(),
            cube_w: cube.width(),
        });
    }
    let n = mask.count();
    if n == 0 {
        return Err(SegmentationError::EmptyMask {
            ref_nm: f64::NAN,
            threshold: f32::NAN,
        });
    }
    let bands = cube.bands();
    let mut acc = vec![0.0f64; bands];
    for (px, &on) in cube.data().chunks_exact(bands).zip(&mask.bits) {
        if on {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += v as f64;
            }
        }
    }
    Ok(Spectrum {
        sample_id: sample_id.to_string(),
        label,
        wavelengths: cube.wavelengths().to_vec(),
        values: acc.into_iter().map(|s| s / n as f64).collect(),
    })
}

/// Options for the mask → spectrum pipeline.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExtractOptions {
    pub ref_nm: f64,
    pub threshold: f32,
    pub largest_component: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            ref_nm: DEFAULT_REF_NM,
            threshold: DEFAULT_THRESHOLD,
            largest_component: true,
        }
    }
}

pub fn extract_spectrum(cube: &Hypercube, opts: &ExtractOptions, sample_id: &str, label: Option<u8>) -> Result<Spectrum> {
    let mut mask = threshold_mask(cube, opts.ref_nm, opts.threshold)?;
    if opts.largest_component {
        mask = largest_component(&mask);
    }
    mean_spectrum(cube, &mask, sample_id, label)
}

/// Rows of `(sample_id, label, spectrum)` sharing one wavelength axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraTable {
    pub wavelengths: Vec<f64>,
    pub rows: Vec<Spectrum>,
}

/// `%.9g`-style formatting: nine significant digits.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.8e}")
    }
}

impl SpectraTable {
    pub fn new(rows: Vec<Spectrum>) -> Result<Self> {
        let wavelengths = rows
            .first()
            .map(|r| r.wavelengths.clone())
            .ok_or_else(|| SegmentationError::Table("no spectra".into()))?;
        for r in &rows {
            if r.wavelengths != wavelengths || r.values.len() != wavelengths.len() {
                return Err(SegmentationError::Table(format!("row '{}' has a different band axis", r.sample_id)));
            }
            if r.sample_id.contains([',', '\n']) {
                return Err(SegmentationError::Table(format!("sample id '{}' contains a separator", r.sample_id)));
            }
        }
        Ok(Self { wavelengths, rows })
    }

    pub fn to_csv(&self, provenance: Option<&Provenance>) -> String {
        let mut s = String::new();
        if let Some(p) = provenance {
            s.push_str(&p.csv_preamble());
        }
        s.push_str("sample_id,label");
        for w in &self.wavelengths {
            let _ = write!(s, ",w{w}");
        }
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.sample_id);
            s.push(',');
            if let Some(l) = row.label {
                let _ = write!(s, "{l}");
            }
            for v in &row.values {
                s.push(',');
                s.push_str(&fmt_sig9(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |m: String| SegmentationError::Table(m);
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "sample_id" || cols[1] != "label" {
            return Err(bad(format!("unexpected header '{header}'")));
        }
        let wavelengths = cols[2..]
            .iter()
            .map(|c| {
                c.strip_prefix('w')
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("bad band column '{c}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut rows = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(bad(format!("row has {} fields, expected {}", f.len(), cols.len())));
            }
            let label = match f[1].trim() {
                "" => None,
                l => Some(l.parse::<u8>().map_err(|_| bad(format!("bad label '{l}'")))?),
            };
            let values = f[2..]
                .iter()
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad(format!("bad value '{v}'"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(Spectrum {
                sample_id: f[0].to_string(),
                label,
                wavelengths: wavelengths.clone(),
                values,
            });
        }
        Self::new(rows)
    }

    pub fn write(&self, path: impl AsRef<Path>, provenance: Option<&Provenance>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv(provenance)).map_err(|source| SegmentationError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SegmentationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_csv(&text)
    }
}
