//! Binary classification of mean spectra: SMOTE, stratified k-fold,
//! random forest and second-order gradient boosting.

mod boost;
mod cv;
mod forest;
mod smote;
mod tree;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::segmentation::SpectraTable;

pub use boost::{fit_boost, BoostConfig, Booster};
pub use cv::{cross_validate, stratified_kfold, ClassReport, CvOptions, FoldResult, Method, MeanMetrics, SmoteMode};
pub use forest::{fit_forest, Forest, ForestConfig};
pub use smote::{smote, DEFAULT_K_NEIGHBORS};
pub use tree::Tree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
    #[error("minority class has fewer than 2 samples")]
    SingletonMinority,
    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    ClassTooSmall { class: u8, count: usize, folds: usize },
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("expected {expected} features, got {got}")]
    FeatureCountMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, ClassifyError>;

/// Row-major samples × features with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f64>, cols: usize, labels: Vec<u8>) -> Result<Self> {
        if cols == 0 {
            return Err(ClassifyError::InvalidMatrix("no features".into()));
        }
        if values.len() != cols * labels.len() {
            return Err(ClassifyError::InvalidMatrix(format!(
                "{} values for {} rows of {cols} features",
                values.len(),
                labels.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::InvalidMatrix("non-finite value".into()));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(ClassifyError::InvalidMatrix(format!("label {l} is not binary")));
        }
        Ok(Self {
            rows: labels.len(),
            cols,
            values,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ClassifyError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.concat(), cols, labels)
    }

    /// Every row must carry a label.
    pub fn from_table(table: &SpectraTable) -> Result<Self> {
        let labels = table
            .rows
            .iter()
            .map(|r| r.label.ok_or_else(|| ClassifyError::InvalidMatrix(format!("'{}' has no label", r.sample_id))))
            .collect::<Result<Vec<_>>>()?;
        let values = table.rows.iter().flat_map(|r| r.values.iter().copied()).collect();
        Self::new(values, table.wavelengths.len(), labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// `[count of 0, count of 1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.rows - ones, ones]
    }

    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: idx.len(),
            cols: self.cols,
            values: idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    fn check_cols(&self, expected: usize) -> Result<()> {
        if self.cols != expected {
            return Err(ClassifyError::FeatureCountMismatch {
                expected,
                got: self.cols,
            });
        }
        Ok(())
    }

    fn check_both_classes(&self) -> Result<()> {
        match self.class_counts() {
            [0, _] | [_, 0] => Err(ClassifyError::DegenerateLabels),
            _ => Ok(()),
        }
    }
}

/// Per-feature z-scoring. Zero-variance features get unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 { sd } else { 1.0 }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let values = x
            .values
            .chunks_exact(x.cols)
            .flat_map(|r| r.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s))
            .collect();
        FeatureMatrix {
            values,
            ..x.clone()
        }
    }
}
