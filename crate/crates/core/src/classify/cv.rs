use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_boost, fit_forest, smote, BoostConfig, ClassifyError, FeatureMatrix, ForestConfig, Result, Standardizer};
use crate::metrics::{class_metrics, confusion, ClassMetrics, Confusion};
use crate::provenance::Provenance;

/// Splits indices into `k` folds, dealing each class (after a seeded
/// shuffle) round-robin so per-fold class counts differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(ClassifyError::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut offset = 0;
    for class in 0..=1u8 {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(ClassifyError::ClassTooSmall {
                class,
                count: members.len(),
                folds: k,
            });
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
            (train, test)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "rf")]
    Forest(ForestConfig),
    #[serde(rename = "gbt")]
    Boost(BoostConfig),
}

impl Method {
    pub fn id(&self) -> &'static str {
        match self {
            Method::Forest(_) => "rf",
            Method::Boost(_) => "gbt",
        }
    }

    fn fit_predict(&self, train: &FeatureMatrix, test: &FeatureMatrix) -> Result<Vec<u8>> {
        Ok(match self {
            Method::Forest(cfg) => fit_forest(train, cfg)?.predict(test)?.0,
            Method::Boost(cfg) => fit_boost(train, cfg)?.predict(test)?.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteMode {
    Off,
    /// Oversample each training fold only.
    WithinFolds,
    /// Oversample the whole set, then split; synthetics can reach test folds.
    BeforeCv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvOptions {
    pub folds: usize,
    pub smote: SmoteMode,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            smote: SmoteMode::WithinFolds,
            k_neighbors: super::DEFAULT_K_NEIGHBORS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: Confusion,
    #[serde(flatten)]
    pub metrics: ClassMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-fold and mean classification metrics; class 1 is the positive class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub tool: String,
    pub version: String,
    pub config: serde_json::Value,
    pub method: String,
    pub smote: bool,
    pub smote_before_cv: bool,
    pub folds: usize,
    pub accuracy: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub mean: MeanMetrics,
    pub per_fold: Vec<FoldResult>,
}

impl ClassReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64 + 1)
}

fn reseed(method: &Method, seed: u64) -> Method {
    match *method {
        Method::Forest(cfg) => Method::Forest(ForestConfig { seed, ..cfg }),
        Method::Boost(cfg) => Method::Boost(BoostConfig { seed, ..cfg }),
    }
}

pub fn cross_validate(x: &FeatureMatrix, method: &Method, opts: &CvOptions, provenance: Provenance) -> Result<ClassReport> {
    let data = match opts.smote {
        SmoteMode::BeforeCv => smote(x, opts.k_neighbors, opts.seed)?,
        _ => x.clone(),
    };
    let folds = stratified_kfold(data.labels(), opts.folds, opts.seed)?;
    let mut per_fold = Vec::with_capacity(folds.len());
    for (f, (train_idx, test_idx)) in folds.iter().enumerate() {
        let train = data.subset(train_idx);
        let test = data.subset(test_idx);
        let scaler = Standardizer::fit(&train);
        let mut train = scaler.transform(&train);
        let test = scaler.transform(&test);
        let seed = fold_seed(opts.seed, f);
        if opts.smote == SmoteMode::WithinFolds {
            train = smote(&train, opts.k_neighbors, seed)?;
        }
        let pred = reseed(method, seed).fit_predict(&train, &test)?;
        let c = confusion(&pred, test.labels(), 1)?;
        per_fold.push(FoldResult {
            fold: f,
            n_train: train.rows(),
            n_test: test.rows(),
            confusion: c,
            metrics: class_metrics(&c)?,
        });
    }
    let col = |g: fn(&ClassMetrics) -> f64| per_fold.iter().map(|r| g(&r.metrics)).collect::<Vec<f64>>();
    let (accuracy, precision, recall, f1) = (col(|m| m.accuracy), col(|m| m.precision), col(|m| m.recall), col(|m| m.f1));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(ClassReport {
        tool: provenance.tool,
        version: provenance.version,
        config: provenance.config,
        method: method.id().to_string(),
        smote: opts.smote != SmoteMode::Off,
        smote_before_cv: opts.smote == SmoteMode::BeforeCv,
        folds: opts.folds,
        mean: MeanMetrics {
            accuracy: mean(&accuracy),
            precision: mean(&precision),
            recall: mean(&recall),
            f1: mean(&f1),
        },
        accuracy,
        precision,
        recall,
        f1,
        per_fold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_counts_102_with_9_positive() {
        let labels: Vec<u8> = (0..102).map(|i| u8::from(i % 11 == 0 && i < 99)).collect();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 9);
        let folds = stratified_kfold(&labels, 5, 3).unwrap();
        let mut seen = vec![0; 102];
        for (train, test) in &folds {
            let pos = test.iter().filter(|&&i| labels[i] == 1).count();
            assert!((1..=2).contains(&pos));
            for &i in test {
                seen[i] += 1;
                assert!(!train.contains(&i));
            }
            assert_eq!(train.len() + test.len(), 102);
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn balanced_ten() {
        let labels = [0u8, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        for (_, test) in stratified_kfold(&labels, 5, 0).unwrap() {
            assert_eq!(test.len(), 2);
            assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
    }

    #[test]
    fn class_too_small() {
        let labels = [0u8, 0, 0, 0, 0, 0, 1, 1];
        assert!(matches!(stratified_kfold(&labels, 5, 0), Err(ClassifyError::ClassTooSmall { class: 1, .. })));
    }
}
