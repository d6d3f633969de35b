//! On-disk dataset layout:
//!
//! ```text
//! <root>/cubes/<id>.hdr|.raw      full cube
//! <root>/rgb/<id>.ppm             pseudo-RGB input
//! <root>/labels10/<id>.hdr|.raw   10-band training target
//! <root>/manifest.csv             sample_id,label,split
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::hypercube::{self, envi, ppm, CubeFormat, Hypercube, HypercubeError, RgbImage, LABEL_BANDS_NM};
use crate::phantom::{self, PhantomConfig, PhantomError};
use crate::provenance::Provenance;
use crate::training::{split_dataset, TrainError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Hypercube(#[from] HypercubeError),
    #[error(transparent)]
    Phantom(#[from] PhantomError),
    #[error(transparent)]
    Split(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(DatasetError::Manifest(format!("unknown split '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    /// 1 = dead, 0 = live.
    pub label: u8,
    pub split: Split,
}

/// Paths inside a dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn cubes_dir(&self) -> PathBuf {
        self.root.join("cubes")
    }

    pub fn rgb_dir(&self) -> PathBuf {
        self.root.join("rgb")
    }

    pub fn labels_dir(&self) -> PathBuf {
        self.root.join("labels10")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.csv")
    }

    pub fn cube_stem(&self, id: &str) -> PathBuf {
        self.cubes_dir().join(id)
    }

    pub fn rgb_path(&self, id: &str) -> PathBuf {
        self.rgb_dir().join(format!("{id}.ppm"))
    }

    pub fn label_stem(&self, id: &str) -> PathBuf {
        self.labels_dir().join(id)
    }

    pub fn create_dirs(&self) -> Result<()> {
        for dir in [self.cubes_dir(), self.rgb_dir(), self.labels_dir()] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(())
    }
}

/// Reads `<stem>.hdr` + `<stem>.raw`.
pub fn load_cube(stem: impl AsRef<Path>) -> Result<Hypercube> {
    let (hdr, raw) = envi::cube_paths(stem);
    Ok(hypercube::read_cube(hdr, raw)?)
}

/// Writes `<stem>.hdr` + `<stem>.raw` (float32 BSQ); provenance goes into
/// `;` comment lines of the header.
pub fn save_cube(cube: &Hypercube, stem: impl AsRef<Path>, provenance: Option<&Provenance>) -> Result<()> {
    let (hdr, raw) = envi::cube_paths(stem);
    hypercube::write_cube(cube, CubeFormat::default(), &hdr, raw)?;
    if let Some(p) = provenance {
        let mut text = fs::read_to_string(&hdr).map_err(io_err(&hdr))?;
        for line in p.lines() {
            text.push_str(&format!("; {line}\n"));
        }
        fs::write(&hdr, text).map_err(io_err(&hdr))?;
    }
    Ok(())
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>, provenance: Option<&Provenance>) -> Result<()> {
    let comments = provenance.map(|p| p.lines().to_vec()).unwrap_or_default();
    Ok(ppm::write_ppm_with_comments(img, path, &comments)?)
}

pub fn manifest_csv(entries: &[ManifestEntry], provenance: Option<&Provenance>) -> String {
    let mut out = provenance.map(Provenance::csv_preamble).unwrap_or_default();
    out.push_str("sample_id,label,split\n");
    for e in entries {
        out.push_str(&format!("{},{},{}\n", e.sample_id, e.label, e.split));
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("sample_id,label,split") {
        return Err(DatasetError::Manifest("missing header 'sample_id,label,split'".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.trim().split(',').collect();
            let [id, label, split] = f[..] else {
                return Err(DatasetError::Manifest(format!("bad row '{line}'")));
            };
            let label = match label {
                "0" => 0,
                "1" => 1,
                _ => return Err(DatasetError::Manifest(format!("label '{label}' is not 0 or 1"))),
            };
            Ok(ManifestEntry {
                sample_id: id.to_string(),
                label,
                split: split.parse()?,
            })
        })
        .collect()
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    parse_manifest(&fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry], provenance: Option<&Provenance>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest_csv(entries, provenance)).map_err(io_err(path))
}

/// Train/val/test assignment for `n` samples in index order.
pub fn assign_splits(n: usize, seed: u64) -> Result<Vec<Split>> {
    let idx: Vec<usize> = (0..n).collect();
    let (train, val, test) = split_dataset(&idx, seed)?;
    let mut out = vec![Split::Train; n];
    for (set, s) in [(train, Split::Train), (val, Split::Val), (test, Split::Test)] {
        for i in set {
            out[i] = s;
        }
    }
    Ok(out)
}

/// Writes a phantom dataset under `root` and returns its manifest.
pub fn gen_synthetic(cfg: &PhantomConfig, root: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    cfg.validate()?;
    let layout = Layout::new(root.as_ref());
    layout.create_dirs()?;
    let splits = assign_splits(cfg.n_samples, cfg.seed)?;
    let prov = Provenance::new(cfg);
    let mut entries = Vec::with_capacity(cfg.n_samples);
    for (i, label) in cfg.labels().into_iter().enumerate() {
        let p = phantom::generate_sample(cfg, i, label)?;
        save_cube(&p.cube, layout.cube_stem(&p.sample_id), Some(&prov))?;
        save_cube(&p.cube.select_bands(&LABEL_BANDS_NM)?, layout.label_stem(&p.sample_id), Some(&prov))?;
        save_rgb(&p.rgb, layout.rgb_path(&p.sample_id), Some(&prov))?;
        entries.push(ManifestEntry {
            sample_id: p.sample_id,
            label,
            split: splits[i],
        });
    }
    write_manifest(layout.manifest_path(), &entries, Some(&prov))?;
    Ok(entries)
}
