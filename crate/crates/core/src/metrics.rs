//! Reconstruction fidelity and binary classification metrics.

use serde::Serialize;
use thiserror::Error;

use crate::hypercube::Hypercube;
use crate::provenance::Provenance;

/// Guard on the relative-error denominator.
pub const EPS_DIV: f64 = 1e-8;
pub const DEFAULT_DATA_RANGE: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: {pred} predicted values vs {gt} reference values")]
    ShapeMismatch { pred: usize, gt: usize },
    #[error("no values to compare")]
    Empty,
    #[error("label sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabels(u8),
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("data range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("cube dimensions differ for {0}")]
    CubeMismatch(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn check<T>(pred: &[T], gt: &[T]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(MetricsError::ShapeMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

fn mean_of<T: Copy + Into<f64>>(pred: &[T], gt: &[T], f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    check(pred, gt)?;
    let total: f64 = pred.iter().zip(gt).map(|(&p, &g)| f(p.into(), g.into())).sum();
    Ok(total / pred.len() as f64)
}

/// Mean relative absolute error, `mean(|p − g| / max(g, 1e-8))`.
pub fn mrae<T: Copy + Into<f64>>(pred: &[T], gt: &[T]) -> Result<f64> {
    mean_of(pred, gt, |p, g| (p - g).abs() / g.max(EPS_DIV))
}

pub fn mse<T: Copy + Into<f64>>(pred: &[T], gt: &[T]) -> Result<f64> {
    mean_of(pred, gt, |p, g| (p - g) * (p - g))
}

/// Root of the mean squared error.
pub fn rmse<T: Copy + Into<f64>>(pred: &[T], gt: &[T]) -> Result<f64> {
    mse(pred, gt).map(f64::sqrt)
}

/// Mean absolute error; also what a per-element root inside the sum gives.
pub fn mae<T: Copy + Into<f64>>(pred: &[T], gt: &[T]) -> Result<f64> {
    mean_of(pred, gt, |p, g| (p - g).abs())
}

/// `10 log10(R² / MSE)` in dB; `+inf` when the inputs are identical.
pub fn psnr<T: Copy + Into<f64>>(pred: &[T], gt: &[T], data_range: f64) -> Result<f64> {
    if data_range.is_nan() || data_range <= 0.0 {
        return Err(MetricsError::NonPositiveRange(data_range));
    }
    let m = mse(pred, gt)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (data_range * data_range / m).log10()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub mrae: f64,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the prediction is exact.
    pub psnr_db: Option<f64>,
}

impl ImageMetrics {
    pub fn compute(pred: &[f32], gt: &[f32], data_range: f64) -> Result<Self> {
        let p = psnr(pred, gt, data_range)?;
        Ok(Self {
            mrae: mrae(pred, gt)?,
            rmse: rmse(pred, gt)?,
            mae: mae(pred, gt)?,
            psnr_db: p.is_finite().then_some(p),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRecord {
    pub sample_id: String,
    #[serde(flatten)]
    pub metrics: ImageMetrics,
}

/// Aggregate over images as the mean of per-image values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tool: String,
    pub version: String,
    pub config: serde_json::Value,
    pub mrae: f64,
    pub rmse: f64,
    pub mae: f64,
    pub psnr_db: Option<f64>,
    pub psnr_infinite: bool,
    pub data_range: f64,
    pub n_images: usize,
    pub per_band_mrae: Vec<f64>,
    pub images: Vec<ImageRecord>,
}

impl EvalReport {
    pub fn psnr(&self) -> f64 {
        self.psnr_db.unwrap_or(f64::INFINITY)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluates `(sample_id, prediction, reference)` triples.
pub fn evaluate_cubes<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a Hypercube, &'a Hypercube)>,
    data_range: f64,
    provenance: Provenance,
) -> Result<EvalReport> {
    let mut images = Vec::new();
    let mut band_sums: Vec<f64> = Vec::new();
    for (id, pred, gt) in pairs {
        if (pred.height(), pred.width(), pred.bands()) != (gt.height(), gt.width(), gt.bands()) {
            return Err(MetricsError::CubeMismatch(id.to_string()));
        }
        let bands = gt.bands();
        if band_sums.is_empty() {
            band_sums = vec![0.0; bands];
        } else if band_sums.len() != bands {
            return Err(MetricsError::CubeMismatch(id.to_string()));
        }
        for (b, acc) in band_sums.iter_mut().enumerate() {
            *acc += mrae(&pred.band_plane(b), &gt.band_plane(b))?;
        }
        images.push(ImageRecord {
            sample_id: id.to_string(),
            metrics: ImageMetrics::compute(pred.data(), gt.data(), data_range)?,
        });
    }
    if images.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = images.len() as f64;
    let avg = |f: &dyn Fn(&ImageMetrics) -> f64| images.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    let psnr_infinite = images.iter().any(|r| r.metrics.psnr_db.is_none());
    let psnr_db = (!psnr_infinite).then(|| avg(&|m| m.psnr_db.unwrap_or(f64::INFINITY)));
    Ok(EvalReport {
        tool: provenance.tool,
        version: provenance.version,
        config: provenance.config,
        mrae: avg(&|m| m.mrae),
        rmse: avg(&|m| m.rmse),
        mae: avg(&|m| m.mae),
        psnr_db,
        psnr_infinite,
        data_range,
        n_images: images.len(),
        per_band_mrae: band_sums.iter().map(|s| s / n).collect(),
        images,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(pred: &[u8], truth: &[u8], positive: u8) -> Result<Confusion> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    if let Some(&bad) = pred.iter().chain(truth).chain([&positive]).find(|&&l| l > 1) {
        return Err(MetricsError::NonBinaryLabels(bad));
    }
    let mut c = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Percentages. An undefined ratio is reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

pub fn class_metrics(c: &Confusion) -> Result<ClassMetrics> {
    let total = c.total();
    if total == 0 {
        return Err(MetricsError::EmptyConfusion);
    }
    let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(ClassMetrics {
        accuracy: 100.0 * (c.tp + c.tn) as f64 / total as f64,
        precision: 100.0 * precision.unwrap_or(0.0),
        recall: 100.0 * recall.unwrap_or(0.0),
        f1: 100.0 * f1.unwrap_or(0.0),
        precision_undefined: precision.is_none(),
        recall_undefined: recall.is_none(),
        f1_undefined: f1.is_none(),
    })
}
