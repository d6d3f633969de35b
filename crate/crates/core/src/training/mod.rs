//! Patch-based MRAE training with Adam and per-epoch exponential decay.

mod adam;
mod data;
mod loss;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tensor};
use crate::metrics;
use crate::models::{build_model, save_checkpoint, Arch, Model, ModelConfig, ModelError};
use crate::provenance::Provenance;
use crate::segmentation::fmt_sig9;

pub use adam::{adam_step, AdamParams, AdamState};
pub use data::{patch_corners, sample_patch, split_dataset, TrainingPair};
pub use loss::mrae_loss;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("need at least 10 items to split, got {0}")]
    TooFewItems(usize),
    #[error("patch size {patch} does not fit an extent of {extent}")]
    PatchTooLarge { patch: usize, extent: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, iteration {iteration}{}", dump.as_ref().map(|p| format!(" (state dumped to {})", p.display())).unwrap_or_default())]
    NonFiniteLoss {
        epoch: usize,
        iteration: usize,
        dump: Option<PathBuf>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    pub batch_size: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub lr0: f64,
    pub lr_decay_gamma: f64,
    /// `None` picks 0.5 for HRNet and 0.9 otherwise.
    pub beta1: Option<f64>,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            iterations_per_epoch: 1000,
            batch_size: 1,
            patch_size: 128,
            stride: 8,
            lr0: 1e-4,
            lr_decay_gamma: 0.98,
            beta1: None,
            beta2: 0.99,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Desk scale: 30 epochs of 50 iterations on 32-pixel patches.
    pub fn desk() -> Self {
        Self {
            epochs: 30,
            iterations_per_epoch: 50,
            patch_size: 32,
            ..Self::default()
        }
    }

    pub fn beta1_for(&self, arch: Arch) -> f64 {
        self.beta1.unwrap_or(if arch == Arch::Hrnet { 0.5 } else { 0.9 })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lr_decay_gamma > 0.0 && self.lr_decay_gamma <= 1.0) {
            return bad("lr_decay_gamma must be in (0, 1]");
        }
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !unit(self.beta2) || self.beta1.is_some_and(|b| !unit(b)) {
            return bad("beta1 and beta2 must be in (0, 1)");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.patch_size == 0 || self.stride == 0 {
            return bad("epochs, batch_size, patch_size and stride must be at least 1");
        }
        if !(self.lr0 > 0.0) || !(self.adam_epsilon > 0.0) {
            return bad("lr0 and adam_epsilon must be positive");
        }
        Ok(())
    }

    /// Canonical `train.*` pairs for checkpoints.
    pub fn to_pairs(&self, arch: Arch) -> BTreeMap<String, String> {
        let v = serde_json::to_value(TrainConfig {
            beta1: Some(self.beta1_for(arch)),
            ..*self
        })
        .expect("config serializes");
        v.as_object()
            .expect("struct")
            .iter()
            .map(|(k, v)| (format!("train.{k}"), v.to_string()))
            .collect()
    }
}

/// `lr0 · gamma^epoch`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * cfg.lr_decay_gamma.powi(epoch as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean patch loss over the epoch; NaN when the epoch ran no iterations.
    pub train_mrae: f64,
    pub val_mrae: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_mrae(&self) -> f64 {
        self.records[self.best_epoch].val_mrae
    }

    pub fn to_csv(&self, provenance: Option<&Provenance>) -> String {
        let mut out = provenance.map(Provenance::csv_preamble).unwrap_or_default();
        out.push_str("epoch,train_mrae,val_mrae,lr\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}\n", r.epoch, fmt_sig9(r.train_mrae), fmt_sig9(r.val_mrae), fmt_sig9(r.lr)));
        }
        out
    }
}

/// Where to write the best checkpoint, and extra metadata to store with it.
#[derive(Debug, Clone)]
pub struct CheckpointTarget {
    pub path: PathBuf,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: TrainHistory,
}

/// Mean over images of full-image MRAE.
pub fn evaluate_mrae(model: &Model, pairs: &[TrainingPair]) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        let pred = model.forward(&p.rgb_tensor())?;
        total += metrics::mrae(pred.data(), &p.target)?;
    }
    Ok(total / pairs.len() as f64)
}

/// One optimization step on a list of `(rgb, target)` patches; returns the loss.
fn step(model: &mut Model, batch: &[(Tensor, Tensor)], state: &mut AdamState, hp: AdamParams) -> Result<f64> {
    let leaves = model.param_tensors(true);
    let mut loss: Option<Tensor> = None;
    for (x, y) in batch {
        let l = mrae_loss(&model.forward_with(x, &leaves)?, y)?;
        loss = Some(match loss {
            Some(acc) => acc.add(&l)?,
            None => l,
        });
    }
    let loss = loss.expect("non-empty batch").scale(1.0 / batch.len() as f64);
    let value = loss.item();
    if !value.is_finite() {
        return Ok(value);
    }
    loss.backward()?;
    let grads: Vec<Vec<f64>> = leaves
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();
    let mut values: Vec<Vec<f64>> = model.params().iter().map(|p| p.data.clone()).collect();
    adam_step(&mut values, &grads, state, hp)?;
    for (i, v) in values.iter().enumerate() {
        model.set_param_data(i, v);
    }
    Ok(value)
}

fn dump_state(target: Option<&CheckpointTarget>, model: &Model, epoch: usize, iteration: usize, loss: f64, lr: f64) -> Option<PathBuf> {
    let path = target?.path.with_extension("nonfinite.json");
    let params: Vec<serde_json::Value> = model
        .params()
        .iter()
        .map(|p| {
            let finite: Vec<f64> = p.data.iter().copied().filter(|v| v.is_finite()).collect();
            serde_json::json!({
                "name": p.name,
                "non_finite": p.data.len() - finite.len(),
                "min": finite.iter().copied().fold(f64::INFINITY, f64::min),
                "max": finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "epoch": epoch,
        "iteration": iteration,
        "loss": loss.to_string(),
        "lr": lr,
        "params": params,
    });
    std::fs::write(&path, serde_json::to_string_pretty(&doc).ok()?).ok()?;
    Some(path)
}

/// Fits a fresh `model_cfg` to a single `(rgb, target)` pair for `steps`
/// Adam steps at the constant rate `cfg.lr0`. Returns the model and the
/// loss before each step followed by the final loss.
pub fn overfit(model_cfg: &ModelConfig, x: &Tensor, y: &Tensor, steps: usize, cfg: &TrainConfig) -> Result<(Model, Vec<f64>)> {
    cfg.validate()?;
    let mut model = build_model(model_cfg)?;
    let mut state = AdamState::new(model.params().iter().map(|p| p.data.len()));
    let hp = AdamParams {
        lr: cfg.lr0,
        beta1: cfg.beta1_for(model_cfg.arch),
        beta2: cfg.beta2,
        eps: cfg.adam_epsilon,
    };
    let batch = [(x.clone(), y.clone())];
    let mut losses = Vec::with_capacity(steps + 1);
    for iteration in 0..steps {
        let loss = step(&mut model, &batch, &mut state, hp)?;
        if !loss.is_finite() || !model.all_finite() {
            return Err(TrainError::NonFiniteLoss { epoch: 0, iteration, dump: None });
        }
        losses.push(loss);
    }
    losses.push(mrae_loss(&model.forward(x)?, y)?.item());
    Ok((model, losses))
}

/// Trains from a fresh initialization of `model_cfg`; returns the model restored to its best validation epoch.
pub fn train(
    model_cfg: &ModelConfig,
    train_set: &[TrainingPair],
    val_set: &[TrainingPair],
    cfg: &TrainConfig,
    checkpoint: Option<&CheckpointTarget>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::InvalidConfig("training and validation sets must be non-empty".into()));
    }
    let mut model = build_model(model_cfg)?;
    let mut state = AdamState::new(model.params().iter().map(|p| p.data.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let beta1 = cfg.beta1_for(model_cfg.arch);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Model)> = None;

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        let hp = AdamParams {
            lr,
            beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_epsilon,
        };
        let mut losses = Vec::with_capacity(cfg.iterations_per_epoch);
        for iteration in 0..cfg.iterations_per_epoch {
            let mut batch = Vec::with_capacity(cfg.batch_size);
            for _ in 0..cfg.batch_size {
                let pair = &train_set[rng.random_range(0..train_set.len())];
                let (_, _, x, y) = sample_patch(pair, cfg.patch_size, cfg.stride, &mut rng)?;
                batch.push((x, y));
            }
            let loss = step(&mut model, &batch, &mut state, hp)?;
            if !loss.is_finite() || !model.all_finite() {
                let dump = dump_state(checkpoint, &model, epoch, iteration, loss, lr);
                return Err(TrainError::NonFiniteLoss { epoch, iteration, dump });
            }
            losses.push(loss);
        }
        let train_mrae = if losses.is_empty() { f64::NAN } else { losses.iter().sum::<f64>() / losses.len() as f64 };
        let val_mrae = evaluate_mrae(&model, val_set)?;
        history.records.push(EpochRecord {
            epoch,
            train_mrae,
            val_mrae,
            lr,
        });
        if best.as_ref().is_none_or(|(b, _)| val_mrae < *b) {
            history.best_epoch = epoch;
            best = Some((val_mrae, model.clone()));
            if let Some(target) = checkpoint {
                let mut meta = target.meta.clone();
                meta.extend(cfg.to_pairs(model_cfg.arch));
                meta.insert("train.best_epoch".into(), epoch.to_string());
                meta.insert("train.best_val_mrae".into(), format!("{val_mrae:?}"));
                save_checkpoint(&model, &meta, &target.path)?;
            }
        }
    }
    let (_, model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, history })
}
