use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde_json::{json, Value};

use hsrecon::autodiff::Tensor;
use hsrecon::classify::{cross_validate, CvOptions, FeatureMatrix, Method, SmoteMode};
use hsrecon::dataset::{self, Layout, ManifestEntry, Split};
use hsrecon::hypercube::{ppm, Hypercube, RgbImage, LABEL_BANDS_NM};
use hsrecon::metrics::evaluate_cubes;
use hsrecon::models::{load_checkpoint, Arch, Model};
use hsrecon::provenance::Provenance;
use hsrecon::segmentation::{extract_spectrum, ExtractOptions, SpectraTable};
use hsrecon::training::{train, CheckpointTarget, TrainingPair};

use crate::config::Settings;
use crate::svg;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";

/// Accepts `x`, `x.hdr` or `x.raw` and returns the stem `x`.
pub fn cube_stem(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("hdr" | "raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn load_cube(path: &Path) -> Result<Hypercube> {
    dataset::load_cube(cube_stem(path)).with_context(|| format!("loading cube {}", path.display()))
}

/// Values outside `[0, 1]` are min-max scaled first.
fn load_normalized(path: &Path) -> Result<Hypercube> {
    let cube = load_cube(path)?;
    Ok(if cube.is_normalized() { cube } else { cube.normalize()? })
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Sorted stems of every `.hdr` in `dir`.
fn cube_ids(dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("hdr") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    ensure!(!ids.is_empty(), "no .hdr cubes in {}", dir.display());
    Ok(ids)
}

pub fn gen_synthetic(settings: &Settings, out: &Path) -> Result<Value> {
    let cfg = settings.phantom()?;
    let entries = dataset::gen_synthetic(&cfg, out).with_context(|| format!("writing dataset to {}", out.display()))?;
    let dead = entries.iter().filter(|e| e.label == 1).count();
    Ok(json!({
        "command": "gen-synthetic",
        "samples": entries.len(),
        "dead": dead,
        "out": out.display().to_string(),
    }))
}

pub fn pseudo_rgb(cube: &Path, out: &Path) -> Result<Value> {
    let img = load_normalized(cube)?.pseudo_rgb()?;
    ensure_parent(out)?;
    let prov = Provenance::new(json!({"command": "pseudo-rgb"}));
    dataset::save_rgb(&img, out, Some(&prov))?;
    Ok(json!({"command": "pseudo-rgb", "out": out.display().to_string()}))
}

pub fn parse_band_list(text: &str) -> Result<Vec<f64>> {
    let bands = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad wavelength '{t}'")))
        .collect::<Result<Vec<_>>>()?;
    ensure!(!bands.is_empty(), "empty band list");
    Ok(bands)
}

pub fn make_labels(cube: &Path, bands: Option<&str>, out: &Path) -> Result<Value> {
    let targets = match bands {
        Some(b) => parse_band_list(b)?,
        None => LABEL_BANDS_NM.to_vec(),
    };
    let labels = load_normalized(cube)?.select_bands(&targets)?;
    ensure_parent(out)?;
    let prov = Provenance::new(json!({"command": "make-labels", "bands_nm": targets}));
    dataset::save_cube(&labels, cube_stem(out), Some(&prov))?;
    Ok(json!({
        "command": "make-labels",
        "wavelengths": labels.wavelengths(),
        "out": cube_stem(out).display().to_string(),
    }))
}

fn load_pairs(layout: &Layout, entries: &[ManifestEntry], split: Split) -> Result<Vec<TrainingPair>> {
    entries
        .iter()
        .filter(|e| e.split == split)
        .map(|e| {
            let rgb = ppm::read_ppm(layout.rgb_path(&e.sample_id))
                .with_context(|| format!("reading rgb for {}", e.sample_id))?;
            let cube = dataset::load_cube(layout.label_stem(&e.sample_id))
                .with_context(|| format!("reading labels for {}", e.sample_id))?;
            Ok(TrainingPair::new(&e.sample_id, &rgb, &cube)?)
        })
        .collect()
}

pub struct TrainArgs<'a> {
    pub arch: &'a str,
    pub data: &'a Path,
    pub out: &'a Path,
    pub epochs: Option<usize>,
    pub iterations: Option<usize>,
}

pub fn train_cmd(settings: &Settings, args: TrainArgs) -> Result<Value> {
    let arch: Arch = args.arch.parse()?;
    let mut cfg = settings.train()?;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(i) = args.iterations {
        cfg.iterations_per_epoch = i;
    }
    let layout = Layout::new(args.data);
    let entries = dataset::read_manifest(layout.manifest_path())?;
    let train_set = load_pairs(&layout, &entries, Split::Train)?;
    let val_set = load_pairs(&layout, &entries, Split::Val)?;
    ensure!(!train_set.is_empty() && !val_set.is_empty(), "manifest needs train and val samples");
    let wavelengths = dataset::load_cube(layout.label_stem(&train_set[0].id))?.wavelengths().to_vec();
    let model_cfg = settings.model(arch, train_set[0].bands)?;

    fs::create_dir_all(args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let prov = Provenance::new(json!({
        "command": "train",
        "model": model_cfg,
        "train": cfg,
        "beta1": cfg.beta1_for(arch),
    }));
    let meta = BTreeMap::from([
        ("tool".to_string(), prov.tool.clone()),
        ("version".to_string(), prov.version.clone()),
        ("data.wavelengths".to_string(), serde_json::to_string(&wavelengths)?),
    ]);
    let ckpt = args.out.join(CHECKPOINT_FILE);
    let target = CheckpointTarget { path: ckpt.clone(), meta };
    let outcome = train(&model_cfg, &train_set, &val_set, &cfg, Some(&target))?;
    let history = args.out.join(HISTORY_FILE);
    write_text(&history, &outcome.history.to_csv(Some(&prov)))?;
    Ok(json!({
        "command": "train",
        "arch": arch.name(),
        "best_epoch": outcome.history.best_epoch,
        "best_val_mrae": outcome.history.best_val_mrae(),
        "params": outcome.model.param_count(),
        "checkpoint": ckpt.display().to_string(),
        "history": history.display().to_string(),
    }))
}

fn reconstruct_one(model: &Model, rgb: &RgbImage, wavelengths: &[f64]) -> Result<Hypercube> {
    let x = Tensor::from_f32(&rgb.to_planar(), &[3, rgb.height(), rgb.width()])?;
    let y = model.forward(&x)?;
    let (bands, h, w) = (y.shape()[0], y.shape()[1], y.shape()[2]);
    let planes: Vec<Vec<f32>> = y
        .data()
        .chunks_exact(h * w)
        .map(|p| p.iter().map(|&v| (v as f32).clamp(0.0, 1.0)).collect())
        .collect();
    ensure!(wavelengths.len() == bands, "checkpoint lists {} wavelengths for {bands} bands", wavelengths.len());
    Ok(Hypercube::from_planes(h, w, wavelengths.to_vec(), &planes)?)
}

pub struct ReconstructArgs<'a> {
    pub checkpoint: &'a Path,
    pub input: Option<&'a Path>,
    pub data: Option<&'a Path>,
    pub split: Option<&'a str>,
    pub out: &'a Path,
}

pub fn reconstruct(args: ReconstructArgs) -> Result<Value> {
    let ck = load_checkpoint(args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let bands = ck.model.config().out_bands;
    let wavelengths: Vec<f64> = match ck.meta.get("data.wavelengths") {
        Some(w) => serde_json::from_str(w).context("checkpoint wavelengths")?,
        None => (1..=bands).map(|b| b as f64).collect(),
    };
    let prov = Provenance::new(json!({
        "command": "reconstruct",
        "model": ck.model.config(),
        "checkpoint_crc32": checkpoint_crc(args.checkpoint)?,
    }));
    match (args.input, args.data) {
        (Some(image), None) => {
            let rgb = ppm::read_ppm(image).with_context(|| format!("reading {}", image.display()))?;
            let cube = reconstruct_one(&ck.model, &rgb, &wavelengths)?;
            ensure_parent(args.out)?;
            dataset::save_cube(&cube, cube_stem(args.out), Some(&prov))?;
            Ok(json!({"command": "reconstruct", "images": 1, "out": cube_stem(args.out).display().to_string()}))
        }
        (None, Some(data)) => {
            let layout = Layout::new(data);
            let split = args.split.map(str::parse::<Split>).transpose()?;
            let entries = dataset::read_manifest(layout.manifest_path())?;
            fs::create_dir_all(args.out).with_context(|| format!("creating {}", args.out.display()))?;
            let mut n = 0;
            for e in entries.iter().filter(|e| split.is_none_or(|s| e.split == s)) {
                let rgb = ppm::read_ppm(layout.rgb_path(&e.sample_id))?;
                let cube = reconstruct_one(&ck.model, &rgb, &wavelengths)?;
                dataset::save_cube(&cube, args.out.join(&e.sample_id), Some(&prov))?;
                n += 1;
            }
            ensure!(n > 0, "no samples selected");
            Ok(json!({"command": "reconstruct", "images": n, "out": args.out.display().to_string()}))
        }
        _ => bail!("give either an input image or --data, not both"),
    }
}

fn checkpoint_crc(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let tail: [u8; 4] = bytes[bytes.len().saturating_sub(4)..].try_into().unwrap_or([0; 4]);
    Ok(format!("{:08x}", u32::from_le_bytes(tail)))
}

pub fn evaluate(pred: &Path, gt: &Path, data_range: f64, out: Option<&Path>) -> Result<Value> {
    let ids = cube_ids(pred)?;
    let mut cubes = Vec::with_capacity(ids.len());
    for id in &ids {
        let p = load_cube(&pred.join(id))?;
        let g = load_cube(&gt.join(id)).with_context(|| format!("no ground truth for {id}"))?;
        cubes.push((id.clone(), p, g));
    }
    let prov = Provenance::new(json!({"command": "evaluate", "data_range": data_range}));
    let report = evaluate_cubes(cubes.iter().map(|(id, p, g)| (id.as_str(), p, g)), data_range, prov)?;
    emit_report("evaluate", &report.to_json(), out)?;
    Ok(serde_json::to_value(&report)?)
}

/// Writes the report to `out` (printing a short summary) or prints it.
fn emit_report(command: &str, text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            write_text(path, &format!("{text}\n"))?;
            print_stdout(&json!({"command": command, "out": path.display().to_string()}).to_string());
            Ok(())
        }
        None => {
            print_stdout(text);
            Ok(())
        }
    }
}

/// A closed stdout (e.g. piped into `head`) is not an error.
pub fn print_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}").and_then(|_| out.flush());
}

pub fn extract_spectra(cube_dir: &Path, manifest: Option<&Path>, opts: ExtractOptions, out: &Path) -> Result<Value> {
    let labels: BTreeMap<String, u8> = match manifest {
        Some(m) => dataset::read_manifest(m)?.into_iter().map(|e| (e.sample_id, e.label)).collect(),
        None => BTreeMap::new(),
    };
    let mut rows = Vec::new();
    for id in cube_ids(cube_dir)? {
        let cube = load_normalized(&cube_dir.join(&id))?;
        let label = labels.get(&id).copied();
        if manifest.is_some() && label.is_none() {
            bail!("{id} is missing from the manifest");
        }
        rows.push(extract_spectrum(&cube, &opts, &id, label).with_context(|| format!("extracting {id}"))?);
    }
    let table = SpectraTable::new(rows)?;
    let prov = Provenance::new(json!({"command": "extract-spectra", "extract": opts}));
    ensure_parent(out)?;
    table.write(out, Some(&prov))?;
    Ok(json!({"command": "extract-spectra", "rows": table.rows.len(), "out": out.display().to_string()}))
}

pub struct ClassifyArgs<'a> {
    pub spectra: &'a Path,
    pub method: &'a str,
    pub folds: usize,
    pub no_smote: bool,
    pub smote_before_cv: bool,
    pub k_neighbors: usize,
    pub out: Option<&'a Path>,
}

pub fn classify(settings: &Settings, args: ClassifyArgs) -> Result<Value> {
    ensure!(!(args.no_smote && args.smote_before_cv), "--no-smote and --smote-before-cv are exclusive");
    let method = match args.method {
        "rf" => Method::Forest(settings.forest()?),
        "gbt" => Method::Boost(settings.boost()?),
        other => bail!("unknown method '{other}' (expected rf or gbt)"),
    };
    let table = SpectraTable::read(args.spectra).with_context(|| format!("reading {}", args.spectra.display()))?;
    let x = FeatureMatrix::from_table(&table)?;
    let opts = CvOptions {
        folds: args.folds,
        smote: if args.no_smote {
            SmoteMode::Off
        } else if args.smote_before_cv {
            SmoteMode::BeforeCv
        } else {
            SmoteMode::WithinFolds
        },
        k_neighbors: args.k_neighbors,
        seed: settings.seed_or(crate::config::DEFAULT_SEED),
    };
    let prov = Provenance::new(json!({"command": "classify", "method": method, "cv": opts}));
    let report = cross_validate(&x, &method, &opts, prov)?;
    emit_report("classify", &report.to_json(), args.out)?;
    Ok(serde_json::to_value(&report)?)
}

/// Per-band means over all rows of both tables.
pub fn compare_spectra(pred: &Path, gt: &Path, out_csv: &Path, out_svg: &Path) -> Result<Value> {
    let p = SpectraTable::read(pred).with_context(|| format!("reading {}", pred.display()))?;
    let g = SpectraTable::read(gt).with_context(|| format!("reading {}", gt.display()))?;
    ensure!(
        p.wavelengths == g.wavelengths,
        "band axes differ: {:?} vs {:?}",
        p.wavelengths,
        g.wavelengths
    );
    let mean = |t: &SpectraTable| -> Vec<f64> {
        (0..t.wavelengths.len())
            .map(|b| t.rows.iter().map(|r| r.values[b]).sum::<f64>() / t.rows.len() as f64)
            .collect()
    };
    let (pm, gm) = (mean(&p), mean(&g));
    let prov = Provenance::new(json!({"command": "compare-spectra", "pred_rows": p.rows.len(), "gt_rows": g.rows.len()}));
    let mut csv = prov.csv_preamble();
    csv.push_str("wavelength_nm,gt_mean,pred_mean,abs_diff\n");
    for ((w, a), b) in p.wavelengths.iter().zip(&gm).zip(&pm) {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            hsrecon::segmentation::fmt_sig9(*w),
            hsrecon::segmentation::fmt_sig9(*a),
            hsrecon::segmentation::fmt_sig9(*b),
            hsrecon::segmentation::fmt_sig9((a - b).abs())
        ));
    }
    write_text(out_csv, &csv)?;
    write_text(out_svg, &svg::spectra_plot(&p.wavelengths, &[("ground truth", &gm), ("reconstructed", &pm)], &prov))?;
    let max_diff = gm.iter().zip(&pm).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(json!({
        "command": "compare-spectra",
        "bands": p.wavelengths.len(),
        "max_abs_diff": max_diff,
        "csv": out_csv.display().to_string(),
        "svg": out_svg.display().to_string(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        assert_eq!(cube_stem(Path::new("a/b.hdr")), PathBuf::from("a/b"));
        assert_eq!(cube_stem(Path::new("a/b.raw")), PathBuf::from("a/b"));
        assert_eq!(cube_stem(Path::new("a/b")), PathBuf::from("a/b"));
    }

    #[test]
    fn band_lists() {
        assert_eq!(parse_band_list("520, 583,903").unwrap(), vec![520.0, 583.0, 903.0]);
        assert!(parse_band_list("520,x").is_err());
    }
}
