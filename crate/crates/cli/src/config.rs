//! `--config` TOML file: optional `[phantom]`, `[train]`, `[model]`,
//! `[forest]` and `[boost]` sections overlaid on the built-in defaults.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hsrecon::classify::{BoostConfig, ForestConfig};
use hsrecon::models::{Arch, ModelConfig};
use hsrecon::phantom::PhantomConfig;
use hsrecon::training::TrainConfig;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    phantom: Option<toml::Table>,
    train: Option<toml::Table>,
    model: Option<toml::Table>,
    forest: Option<toml::Table>,
    boost: Option<toml::Table>,
}

/// Architecture scale overrides; unset fields keep the toy defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    base_width: Option<usize>,
    depth: Option<usize>,
    levels: Option<usize>,
    heads: Option<usize>,
    ffn_expansion: Option<usize>,
}

/// Loaded config plus the `--seed` override.
#[derive(Debug, Default)]
pub struct Settings {
    file: FileConfig,
    seed: Option<u64>,
}

/// Replaces the fields of `base` named in `section`; unknown keys are errors.
fn overlay<T: Serialize + DeserializeOwned>(base: &T, section: Option<&toml::Table>, name: &str) -> Result<T> {
    let mut value = serde_json::to_value(base)?;
    if let Some(table) = section {
        let obj = value.as_object_mut().expect("sections are structs");
        for (k, v) in table {
            obj.insert(k.clone(), serde_json::to_value(v)?);
        }
    }
    serde_json::from_value(value).with_context(|| format!("invalid [{name}] section"))
}

impl Settings {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => FileConfig::default(),
        };
        Ok(Self { file, seed })
    }

    /// Command-line phantom flags take precedence over the `[phantom]` section.
    pub fn with_phantom_overrides(mut self, n_samples: Option<usize>, height: Option<usize>, width: Option<usize>) -> Self {
        let table = self.file.phantom.get_or_insert_with(toml::Table::new);
        for (key, value) in [("n_samples", n_samples), ("height", height), ("width", width)] {
            if let Some(v) = value {
                table.insert(key.into(), toml::Value::Integer(v as i64));
            }
        }
        self
    }

    /// `--seed` if given, else `fallback`.
    pub fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }

    pub fn phantom(&self) -> Result<PhantomConfig> {
        let base = PhantomConfig {
            seed: DEFAULT_SEED,
            ..PhantomConfig::default()
        };
        let mut cfg = overlay(&base, self.file.phantom.as_ref(), "phantom")?;
        cfg.seed = self.seed_or(cfg.seed);
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let base = TrainConfig {
            seed: DEFAULT_SEED,
            ..TrainConfig::desk()
        };
        let mut cfg = overlay(&base, self.file.train.as_ref(), "train")?;
        cfg.seed = self.seed_or(cfg.seed);
        Ok(cfg)
    }

    pub fn model(&self, arch: Arch, out_bands: usize) -> Result<ModelConfig> {
        let section: ModelSection = match &self.file.model {
            Some(t) => t.clone().try_into().context("invalid [model] section")?,
            None => ModelSection::default(),
        };
        let toy = ModelConfig::toy(arch, out_bands, DEFAULT_SEED);
        Ok(ModelConfig {
            base_width: section.base_width.unwrap_or(toy.base_width),
            depth: section.depth.unwrap_or(toy.depth),
            levels: section.levels.unwrap_or(toy.levels),
            heads: section.heads.unwrap_or(toy.heads),
            ffn_expansion: section.ffn_expansion.unwrap_or(toy.ffn_expansion),
            seed: self.seed_or(DEFAULT_SEED),
            ..toy
        })
    }

    pub fn forest(&self) -> Result<ForestConfig> {
        let base = ForestConfig {
            seed: DEFAULT_SEED,
            ..ForestConfig::default()
        };
        let mut cfg = overlay(&base, self.file.forest.as_ref(), "forest")?;
        cfg.seed = self.seed_or(cfg.seed);
        Ok(cfg)
    }

    pub fn boost(&self) -> Result<BoostConfig> {
        let base = BoostConfig {
            seed: DEFAULT_SEED,
            ..BoostConfig::default()
        };
        let mut cfg = overlay(&base, self.file.boost.as_ref(), "boost")?;
        cfg.seed = self.seed_or(cfg.seed);
        Ok(cfg)
    }
}
