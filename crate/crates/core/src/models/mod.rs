//! Toy-scale RGB → λ-band reconstruction networks built on [`crate::autodiff`].

mod checkpoint;
mod edsr;
mod hrnet;
mod layers;
mod mstpp;
mod restormer;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tensor};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_as, save_checkpoint, Checkpoint};
pub use edsr::RESIDUAL_SCALE;
pub use layers::{Init, ParamSpec, BRANCH_GAIN, OUTPUT_GAIN};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("unknown architecture '{0}'")]
    UnknownArch(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint holds a {found} model, expected {expected}")]
    ArchMismatch { expected: Arch, found: Arch },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Hrnet,
    Mstpp,
    Restormer,
    Edsr,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Hrnet, Arch::Mstpp, Arch::Restormer, Arch::Edsr];

    pub fn id(self) -> u8 {
        match self {
            Arch::Hrnet => 0,
            Arch::Mstpp => 1,
            Arch::Restormer => 2,
            Arch::Edsr => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Arch> {
        Arch::ALL.into_iter().find(|a| a.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Hrnet => "hrnet",
            Arch::Mstpp => "mstpp",
            Arch::Restormer => "restormer",
            Arch::Edsr => "edsr",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| ModelError::UnknownArch(s.to_string()))
    }
}

/// Architecture identity and scale. For Restormer, `base_width` and
/// `heads` are the top-level values; both double per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Arch,
    pub out_bands: usize,
    pub base_width: usize,
    pub depth: usize,
    pub levels: usize,
    pub heads: usize,
    pub ffn_expansion: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Default toy scale for `arch`.
    pub fn toy(arch: Arch, out_bands: usize, seed: u64) -> Self {
        let (base_width, depth, levels, heads) = match arch {
            Arch::Edsr => (32, 8, 1, 1),
            Arch::Hrnet => (16, 2, 4, 1),
            Arch::Mstpp => (32, 2, 1, 4),
            Arch::Restormer => (16, 1, 3, 1),
        };
        Self {
            arch,
            out_bands,
            base_width,
            depth,
            levels,
            heads,
            ffn_expansion: 2,
            seed,
        }
    }

    /// Smallest useful config, for gradient checks: one transformer block
    /// for Restormer, one residual block per branch for HRNet's two levels.
    pub fn micro(arch: Arch, seed: u64) -> Self {
        Self {
            arch,
            out_bands: 2,
            base_width: 4,
            depth: 1,
            levels: if arch == Arch::Restormer { 1 } else { 2 },
            heads: 2,
            ffn_expansion: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.out_bands == 0 || self.base_width == 0 || self.depth == 0 || self.levels == 0 || self.heads == 0 {
            return bad("out_bands, base_width, depth, levels and heads must be at least 1".into());
        }
        if self.ffn_expansion == 0 {
            return bad("ffn_expansion must be at least 1".into());
        }
        if matches!(self.arch, Arch::Hrnet | Arch::Restormer) && self.levels > 6 {
            return bad(format!("levels {} exceeds 6", self.levels));
        }
        if matches!(self.arch, Arch::Mstpp | Arch::Restormer) && !self.base_width.is_multiple_of(self.heads) {
            return bad(format!("base_width {} not divisible by heads {}", self.base_width, self.heads));
        }
        Ok(())
    }

    /// Spatial dims must be multiples of this.
    pub fn spatial_multiple(&self) -> usize {
        match self.arch {
            Arch::Hrnet | Arch::Restormer => 1 << (self.levels - 1),
            Arch::Mstpp | Arch::Edsr => 1,
        }
    }

    /// Canonical `key=value` pairs.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        [
            ("arch", self.arch.to_string()),
            ("base_width", self.base_width.to_string()),
            ("depth", self.depth.to_string()),
            ("ffn_expansion", self.ffn_expansion.to_string()),
            ("heads", self.heads.to_string()),
            ("levels", self.levels.to_string()),
            ("out_bands", self.out_bands.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (format!("model.{k}"), v))
        .collect()
    }

    pub fn from_pairs(pairs: &std::collections::BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            pairs
                .get(&format!("model.{k}"))
                .ok_or_else(|| ModelError::CorruptCheckpoint(format!("missing model.{k}")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| ModelError::CorruptCheckpoint(format!("model.{k} is not an integer")))
        };
        Ok(Self {
            arch: get("arch")?.parse()?,
            out_bands: num("out_bands")? as usize,
            base_width: num("base_width")? as usize,
            depth: num("depth")? as usize,
            levels: num("levels")? as usize,
            heads: num("heads")? as usize,
            ffn_expansion: num("ffn_expansion")? as usize,
            seed: num("seed")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// A built network: config plus named parameters, kept on the `f32` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: Vec<Param>,
}

pub(crate) fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

fn specs_for(cfg: &ModelConfig) -> Vec<ParamSpec> {
    match cfg.arch {
        Arch::Edsr => edsr::params(cfg),
        Arch::Hrnet => hrnet::params(cfg),
        Arch::Mstpp => mstpp::params(cfg),
        Arch::Restormer => restormer::params(cfg),
    }
}

/// Deterministic initialization from `config.seed`.
pub fn build_model(config: &ModelConfig) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = specs_for(config)
        .into_iter()
        .map(|s| {
            let n: usize = s.shape.iter().product();
            let data = match s.init {
                Init::HeUniform { fan_in, gain } => {
                    let bound = gain * (6.0 / fan_in as f64).sqrt();
                    (0..n).map(|_| round_f32(rng.random_range(-bound..bound))).collect()
                }
                Init::Const(c) => vec![round_f32(c); n],
            };
            Param {
                name: s.name,
                shape: s.shape,
                data,
            }
        })
        .collect();
    Ok(Model {
        config: *config,
        params,
    })
}

/// Parameters bound to tensors for one forward pass.
pub struct ParamMap<'a> {
    index: HashMap<&'a str, &'a Tensor>,
}

impl ParamMap<'_> {
    pub(crate) fn get(&self, name: &str) -> &Tensor {
        self.index
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} is not registered"))
    }
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Replaces parameter values, snapping them to the `f32` grid.
    pub fn set_param_data(&mut self, i: usize, data: &[f64]) {
        let p = &mut self.params[i];
        assert_eq!(p.data.len(), data.len(), "size of {}", p.name);
        p.data.iter_mut().zip(data).for_each(|(d, &v)| *d = round_f32(v));
    }

    pub(crate) fn from_parts(config: ModelConfig, params: Vec<Param>) -> Result<Self> {
        config.validate()?;
        let expected = specs_for(&config);
        if expected.len() != params.len()
            || expected.iter().zip(&params).any(|(s, p)| s.name != p.name || s.shape != p.shape)
        {
            return Err(ModelError::CorruptCheckpoint("parameter table does not match the config".into()));
        }
        Ok(Self { config, params })
    }

    /// One tensor per parameter; leaves when `requires_grad`.
    pub fn param_tensors(&self, requires_grad: bool) -> Vec<Tensor> {
        self.params
            .iter()
            .map(|p| {
                let t = if requires_grad { Tensor::leaf(p.data.clone(), &p.shape) } else { Tensor::new(p.data.clone(), &p.shape) };
                t.expect("parameter shapes are consistent")
            })
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    /// Inference with the stored parameters.
    pub fn forward(&self, rgb: &Tensor) -> Result<Tensor> {
        self.forward_with(rgb, &self.param_tensors(false))
    }

    /// Forward pass against externally supplied parameter tensors (same
    /// order as [`Model::params`]). Inputs whose spatial dims are not a
    /// multiple of [`ModelConfig::spatial_multiple`] are reflect-padded and
    /// the output cropped back.
    pub fn forward_with(&self, rgb: &Tensor, params: &[Tensor]) -> Result<Tensor> {
        let (h, w) = match *rgb.shape() {
            [3, h, w] if h > 0 && w > 0 => (h, w),
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "model input",
                    lhs: vec![3, 0, 0],
                    rhs: rgb.shape().to_vec(),
                }
                .into())
            }
        };
        assert_eq!(params.len(), self.params.len(), "parameter count");
        let map = ParamMap {
            index: self.params.iter().map(|p| p.name.as_str()).zip(params).collect(),
        };
        let m = self.config.spatial_multiple();
        let (ph, pw) = (h.div_ceil(m) * m - h, w.div_ceil(m) * m - w);
        let x = if ph > 0 || pw > 0 { rgb.pad_reflect(ph, pw)? } else { rgb.clone() };
        let out = match self.config.arch {
            Arch::Edsr => edsr::forward(&self.config, &map, &x)?,
            Arch::Hrnet => hrnet::forward(&self.config, &map, &x)?,
            Arch::Mstpp => mstpp::forward(&self.config, &map, &x)?,
            Arch::Restormer => restormer::forward(&self.config, &map, &x)?,
        };
        Ok(if ph > 0 || pw > 0 { out.crop(0, 0, h, w)? } else { out })
    }
}

/// Finite-difference check of `model` on input `x` through a random
/// weighted-sum readout drawn from `readout_seed`, against every parameter
/// and the input. Returns the max relative error.
pub fn model_grad_check(model: &Model, x: &Tensor, readout_seed: u64) -> Result<f64> {
    model_grad_check_with(model, x, readout_seed, crate::autodiff::DEFAULT_EPS)
}

/// [`model_grad_check`] with finite-difference step `eps`.
pub fn model_grad_check_with(model: &Model, x: &Tensor, readout_seed: u64, eps: f64) -> Result<f64> {
    let out_shape = model.forward(x)?.shape().to_vec();
    let n: usize = out_shape.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(readout_seed);
    let readout = Tensor::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), &out_shape)?;
    let mut inputs = vec![Tensor::leaf(x.to_vec(), x.shape())?];
    inputs.extend(model.param_tensors(true));
    let f = |t: &[Tensor]| -> Result<Tensor> { Ok(model.forward_with(&t[0], &t[1..])?.mul(&readout)?.sum()) };
    crate::autodiff::grad_check_with(f, &inputs, eps)
}
