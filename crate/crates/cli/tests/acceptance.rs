//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any hard criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use hsrecon::autodiff::{grad_check, AutodiffError, Conv2dSpec, Tensor};
use hsrecon::hypercube::envi::{self, CubeFormat, DataType, Interleave};
use hsrecon::hypercube::{Hypercube, LABEL_BANDS_NM};
use hsrecon::metrics::{self, class_metrics, confusion, Confusion};
use hsrecon::models::{build_model, decode_checkpoint, encode_checkpoint, model_grad_check, Arch, ModelConfig};
use hsrecon::phantom::{generate, generate_sample, PhantomConfig};
use hsrecon::segmentation::threshold_mask;
use hsrecon::training::{overfit, TrainConfig, TrainingPair};

type R<T> = Result<T, String>;

struct Verdict {
    passed: bool,
    soft: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, soft: false, detail }
}

fn hsrecon(args: &[&str]) -> R<String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hsrecon"))
        .args(args)
        .output()
        .map_err(|e| format!("spawn failed: {e}"))?;
    if !out.status.success() {
        return Err(format!("hsrecon {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read_json(path: &Path) -> R<Value> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn leaf(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::leaf(rand_vec(rng, shape.iter().product()), shape).unwrap()
}

/// `Σ r_i y_i` with a fixed random readout, so every output element carries gradient.
fn readout(y: &Tensor, seed: u64) -> Result<Tensor, AutodiffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let r = Tensor::new(rand_vec(&mut rng, y.numel()), y.shape())?;
    Ok(y.mul(&r)?.sum())
}

type Case = Box<dyn Fn(&[Tensor]) -> Result<Tensor, AutodiffError>>;

/// Op-level cases for one seed: name, function, inputs.
fn op_cases(seed: u64) -> Vec<(&'static str, Case, Vec<Tensor>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = leaf(&mut rng, &[3, 4]);
    // divisor and kink inputs stay away from 0
    let away: Vec<f64> = (0..12)
        .map(|_| {
            let v: f64 = rng.random_range(0.3..1.5);
            if rng.random_bool(0.5) { v } else { -v }
        })
        .collect();
    let b = Tensor::leaf(away, &[3, 4]).unwrap();
    let x3 = leaf(&mut rng, &[4, 3, 5]);
    let gamma = leaf(&mut rng, &[4]);
    let beta = leaf(&mut rng, &[4]);
    let (m1, m2) = (leaf(&mut rng, &[2, 3, 4]), leaf(&mut rng, &[2, 4, 5]));
    let (c1, c2) = (leaf(&mut rng, &[3, 4]), leaf(&mut rng, &[4, 2]));
    let col = leaf(&mut rng, &[2, 1, 1]);
    let groups = if seed.is_multiple_of(2) { 1 } else { 2 };
    let stride = if seed.is_multiple_of(3) { 2 } else { 1 };
    let img = leaf(&mut rng, &[4, 7, 5]);
    let kernel = leaf(&mut rng, &[4, 4 / groups, 3, 3]);
    let bias = leaf(&mut rng, &[4]);
    let shuf = leaf(&mut rng, &[8, 2, 3]);
    let axis = (seed % 3) as usize;
    let s = seed;
    vec![
        ("add", Box::new(move |t: &[Tensor]| readout(&t[0].add(&t[1])?, s)), vec![a.clone(), b.clone()]),
        ("sub", Box::new(move |t: &[Tensor]| readout(&t[0].sub(&t[1])?, s)), vec![a.clone(), b.clone()]),
        ("mul", Box::new(move |t: &[Tensor]| readout(&t[0].mul(&t[1])?, s)), vec![a.clone(), b.clone()]),
        ("div", Box::new(move |t: &[Tensor]| readout(&t[0].div(&t[1])?, s)), vec![a.clone(), b.clone()]),
        ("relu", Box::new(move |t: &[Tensor]| readout(&t[0].relu(), s)), vec![b.clone()]),
        ("abs", Box::new(move |t: &[Tensor]| readout(&t[0].abs(), s)), vec![b.clone()]),
        ("gelu", Box::new(move |t: &[Tensor]| readout(&t[0].gelu(), s)), vec![a.clone()]),
        ("sigmoid", Box::new(move |t: &[Tensor]| readout(&t[0].sigmoid(), s)), vec![a.clone()]),
        ("scale", Box::new(move |t: &[Tensor]| readout(&t[0].scale(-1.7), s)), vec![a.clone()]),
        ("mean", Box::new(|t: &[Tensor]| Ok(t[0].mul(&t[0])?.mean())), vec![a.clone()]),
        ("reshape", Box::new(move |t: &[Tensor]| readout(&t[0].reshape(&[4, 3])?.transpose()?, s)), vec![a.clone()]),
        ("matmul", Box::new(move |t: &[Tensor]| readout(&t[0].matmul(&t[1])?, s)), vec![c1, c2]),
        ("bmm", Box::new(move |t: &[Tensor]| readout(&t[0].bmm(&t[1])?, s)), vec![m1, m2]),
        ("broadcast", Box::new(move |t: &[Tensor]| readout(&t[0].broadcast_to(&[2, 3, 5])?, s)), vec![col]),
        (
            "conv2d",
            Box::new(move |t: &[Tensor]| {
                readout(&t[0].conv2d(&t[1], Some(&t[2]), Conv2dSpec { stride, padding: 1, groups })?, s)
            }),
            vec![img.clone(), kernel, bias],
        ),
        ("pad_reflect", Box::new(move |t: &[Tensor]| readout(&t[0].pad_reflect(2, 3)?, s)), vec![img]),
        (
            "pixel_shuffle",
            Box::new(move |t: &[Tensor]| readout(&t[0].pixel_shuffle(2)?.crop(1, 0, 3, 5)?, s)),
            vec![shuf.clone()],
        ),
        (
            "pixel_unshuffle",
            Box::new(move |t: &[Tensor]| {
                let y = t[0].pixel_shuffle(2)?.pixel_unshuffle(2)?;
                readout(&y.mul(&y)?, s)
            }),
            vec![shuf],
        ),
        (
            "layer_norm",
            Box::new(move |t: &[Tensor]| readout(&t[0].layer_norm(0, &t[1], &t[2])?, s)),
            vec![x3.clone(), gamma, beta],
        ),
        ("softmax", Box::new(move |t: &[Tensor]| readout(&t[0].scale(2.0).softmax(axis)?, s)), vec![x3.clone()]),
        ("l2_normalize", Box::new(move |t: &[Tensor]| readout(&t[0].l2_normalize(axis, 1e-12)?, s)), vec![x3]),
    ]
}

fn criterion_1() -> R<Verdict> {
    let start = Instant::now();
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checks = 0;
    for seed in 0..20u64 {
        for (name, f, inputs) in op_cases(seed) {
            let err = grad_check(&f, &inputs).map_err(|e| format!("{name}: {e}"))?;
            checks += 1;
            if err > worst.0 {
                worst = (err, format!("{name} seed {seed}"));
            }
        }
        for arch in Arch::ALL {
            let m = build_model(&ModelConfig::micro(arch, seed)).map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let x = Tensor::new((0..3 * 8 * 8).map(|_| rng.random_range(0.0..1.0)).collect(), &[3, 8, 8]).unwrap();
            let err = model_grad_check(&m, &x, seed).map_err(|e| format!("{arch}: {e}"))?;
            checks += 1;
            if err > worst.0 {
                worst = (err, format!("{arch} micro seed {seed}"));
            }
        }
    }
    let t = start.elapsed();
    Ok(verdict(
        worst.0 < 1e-3 && t < Duration::from_secs(120),
        format!("{checks} gradchecks over 20 seeds, worst rel err {:.2e} ({}), {:.1}s", worst.0, worst.1, t.as_secs_f64()),
    ))
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn criterion_2() -> R<Verdict> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = Vec::new();
    for i in 0..100 {
        let n = rng.random_range(1..400);
        let gt: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let pred: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let (mut rel, mut sq, mut ab) = (0.0f64, 0.0f64, 0.0f64);
        for k in 0..n {
            let (pv, gv) = (pred[k] as f64, gt[k] as f64);
            let d = pv - gv;
            rel += d.abs() / if gv > 1e-8 { gv } else { 1e-8 };
            sq += d * d;
            ab += d.abs();
        }
        let nf = n as f64;
        let oracle = [rel / nf, (sq / nf).sqrt(), ab / nf, 10.0 * (1.0 / (sq / nf)).log10()];
        let got = [
            metrics::mrae(&pred, &gt).unwrap(),
            metrics::rmse(&pred, &gt).unwrap(),
            metrics::mae(&pred, &gt).unwrap(),
            metrics::psnr(&pred, &gt, 1.0).unwrap(),
        ];
        for (name, (g, o)) in ["mrae", "rmse", "mae", "psnr"].iter().zip(got.iter().zip(oracle)) {
            if !close(*g, o) {
                mismatches.push(format!("{name}#{i}: {g} vs {o}"));
            }
        }

        let m = rng.random_range(1..60);
        let truth: Vec<u8> = (0..m).map(|_| rng.random_range(0..2)).collect();
        let pred_l: Vec<u8> = (0..m).map(|_| rng.random_range(0..2)).collect();
        let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
        for k in 0..m {
            match (pred_l[k], truth[k]) {
                (1, 1) => tp += 1,
                (0, 0) => tn += 1,
                (1, 0) => fp += 1,
                _ => fn_ += 1,
            }
        }
        let c = confusion(&pred_l, &truth, 1).unwrap();
        if (c.tp, c.tn, c.fp, c.fn_) != (tp, tn, fp, fn_) {
            mismatches.push(format!("confusion#{i}"));
        }
        let cm = class_metrics(&c).unwrap();
        let acc = 100.0 * (tp + tn) as f64 / m as f64;
        let prec = if tp + fp > 0 { 100.0 * tp as f64 / (tp + fp) as f64 } else { 0.0 };
        let rec = if tp + fn_ > 0 { 100.0 * tp as f64 / (tp + fn_) as f64 } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        for (name, (g, o)) in ["accuracy", "precision", "recall", "f1"]
            .iter()
            .zip([cm.accuracy, cm.precision, cm.recall, cm.f1].into_iter().zip([acc, prec, rec, f1]))
        {
            if !close(g, o) {
                mismatches.push(format!("{name}#{i}: {g} vs {o}"));
            }
        }
    }
    let worked = class_metrics(&Confusion { tp: 3, tn: 2, fp: 1, fn_: 2 }).unwrap();
    let worked_ok = close(worked.accuracy, 62.5)
        && close(worked.precision, 75.0)
        && close(worked.recall, 60.0)
        && (worked.f1 - 200.0 / 3.0).abs() < 1e-9;
    let t = start.elapsed();
    Ok(verdict(
        mismatches.is_empty() && worked_ok && t < Duration::from_secs(30),
        format!(
            "100 instances x 8 metrics, {} mismatches{}; worked example {:.3}/{:.3}/{:.3}/{:.3}; {:.2}s",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default(),
            worked.accuracy,
            worked.precision,
            worked.recall,
            worked.f1,
            t.as_secs_f64()
        ),
    ))
}

/// Loss trajectories and final checkpoint bytes per architecture.
type OverfitRuns = Vec<(Arch, Vec<f64>, Vec<u8>, Duration)>;

fn run_overfits() -> R<OverfitRuns> {
    let cfg = PhantomConfig::default();
    let ph = generate_sample(&cfg, 0, cfg.labels()[0]).map_err(|e| e.to_string())?;
    let labels = ph.cube.select_bands(&LABEL_BANDS_NM).map_err(|e| e.to_string())?;
    let pair = TrainingPair::new(&ph.sample_id, &ph.rgb, &labels).map_err(|e| e.to_string())?;
    // 16×16 window centred on the egg
    let (row, col) = (ph.ellipse.cy.round() as usize - 8, ph.ellipse.cx.round() as usize - 8);
    let (x, y) = pair.window(row, col, 16);
    let train_cfg = TrainConfig { seed: 42, ..TrainConfig::desk() };
    let mut runs = Vec::new();
    for arch in Arch::ALL {
        let start = Instant::now();
        let (model, losses) =
            overfit(&ModelConfig::toy(arch, 10, 42), &x, &y, 500, &train_cfg).map_err(|e| format!("{arch}: {e}"))?;
        let bytes = encode_checkpoint(&model, &BTreeMap::new()).map_err(|e| e.to_string())?;
        runs.push((arch, losses, bytes, start.elapsed()));
    }
    Ok(runs)
}

fn criterion_3(runs: &OverfitRuns) -> Verdict {
    let mut ok = true;
    let parts: Vec<String> = runs
        .iter()
        .map(|(arch, losses, _, t)| {
            let last = *losses.last().unwrap();
            ok &= last < 0.02 && *t < Duration::from_secs(300);
            format!("{arch} {:.3}->{last:.4} ({:.0}s)", losses[0], t.as_secs_f64())
        })
        .collect();
    verdict(ok, format!("500 steps on a 16x16 patch: {}", parts.join(", ")))
}

const ARCHS: [&str; 3] = ["hrnet", "mstpp", "restormer"];

/// Full CLI pipeline under `root`; returns per-stage wall times.
fn run_pipeline(root: &Path) -> R<BTreeMap<String, Duration>> {
    let mut times = BTreeMap::new();
    let data = root.join("data");
    let t = Instant::now();
    hsrecon(&["gen-synthetic", "--out", p(&data)])?;
    times.insert("gen".into(), t.elapsed());
    let labels = data.join("labels10");
    for arch in ARCHS {
        let t = Instant::now();
        let run = root.join(arch);
        hsrecon(&["train", "--arch", arch, "--data", p(&data), "--out", p(&run)])?;
        let ckpt = run.join("model.ckpt");
        let test = run.join("test");
        hsrecon(&["reconstruct", "--checkpoint", p(&ckpt), "--data", p(&data), "--split", "test", "--out", p(&test)])?;
        hsrecon(&["evaluate", "--pred", p(&test), "--gt", p(&labels), "--out", p(&run.join("eval.json"))])?;
        times.insert(arch.into(), t.elapsed());
    }

    let t = Instant::now();
    let hr = root.join("hrnet");
    let all = hr.join("all");
    hsrecon(&["reconstruct", "--checkpoint", p(&hr.join("model.ckpt")), "--data", p(&data), "--out", p(&all)])?;
    let manifest = data.join("manifest.csv");
    let recon_csv = hr.join("spectra.csv");
    let gt_csv = root.join("gt_spectra.csv");
    hsrecon(&["extract-spectra", p(&all), "--manifest", p(&manifest), "--out", p(&recon_csv)])?;
    hsrecon(&["extract-spectra", p(&labels), "--manifest", p(&manifest), "--out", p(&gt_csv)])?;
    for method in ["rf", "gbt"] {
        let c = |csv: &Path, out: PathBuf, extra: &[&str]| -> R<String> {
            let mut args = vec!["classify", "--spectra", p(csv), "--method", method, "--folds", "5", "--out", p(&out)];
            args.extend_from_slice(extra);
            hsrecon(&args)
        };
        c(&recon_csv, hr.join(format!("{method}_smote.json")), &[])?;
        c(&recon_csv, hr.join(format!("{method}_nosmote.json")), &["--no-smote"])?;
        c(&gt_csv, root.join(format!("gt_{method}_smote.json")), &[])?;
    }
    hsrecon(&[
        "compare-spectra",
        "--pred",
        p(&recon_csv),
        "--gt",
        p(&gt_csv),
        "--out-csv",
        p(&root.join("compare.csv")),
        "--out-svg",
        p(&root.join("compare.svg")),
    ])?;
    times.insert("classification".into(), t.elapsed());
    Ok(times)
}

fn eval_of(root: &Path, arch: &str) -> R<(f64, f64)> {
    let v = read_json(&root.join(arch).join("eval.json"))?;
    let mrae = v["mrae"].as_f64().ok_or("eval.json lacks mrae")?;
    let psnr = v["psnr_db"].as_f64().unwrap_or(f64::INFINITY);
    Ok((mrae, psnr))
}

fn criterion_4(root: &Path, times: &BTreeMap<String, Duration>) -> R<Verdict> {
    let (mrae, psnr) = eval_of(root, "hrnet")?;
    let t = times["gen"] + times["hrnet"];
    Ok(verdict(
        mrae < 0.15 && psnr > 25.0 && t < Duration::from_secs(900),
        format!("HRNet test MRAE {mrae:.4} (< 0.15), PSNR {psnr:.2} dB (> 25), {:.0}s", t.as_secs_f64()),
    ))
}

fn criterion_5(root: &Path) -> R<Verdict> {
    let (h, _) = eval_of(root, "hrnet")?;
    let (m, _) = eval_of(root, "mstpp")?;
    let (r, _) = eval_of(root, "restormer")?;
    Ok(Verdict {
        passed: h <= m && r <= m,
        soft: true,
        detail: format!("test MRAE hrnet {h:.4}, restormer {r:.4}, mstpp {m:.4}; expected hrnet <= mstpp and restormer <= mstpp"),
    })
}

fn criterion_6(root: &Path, times: &BTreeMap<String, Duration>) -> R<Verdict> {
    let hr = root.join("hrnet");
    let mut ok = times["classification"] < Duration::from_secs(120);
    let mut parts = Vec::new();
    for method in ["rf", "gbt"] {
        let smote = read_json(&hr.join(format!("{method}_smote.json")))?;
        let plain = read_json(&hr.join(format!("{method}_nosmote.json")))?;
        let gt = read_json(&root.join(format!("gt_{method}_smote.json")))?;
        let get = |v: &Value, k: &str| v["mean"][k].as_f64().unwrap_or(f64::NAN);
        let (acc, rec, rec0, gacc) =
            (get(&smote, "accuracy"), get(&smote, "recall"), get(&plain, "recall"), get(&gt, "accuracy"));
        ok &= acc >= 75.0 && rec >= rec0 && gacc >= acc - 10.0;
        parts.push(format!(
            "{method}: acc {acc:.2}% recall {rec:.2}% (no-SMOTE {rec0:.2}%), GT acc {gacc:.2}%"
        ));
    }
    Ok(verdict(
        ok,
        format!("{}; {:.0}s", parts.join("; "), times["classification"].as_secs_f64()),
    ))
}

fn criterion_7() -> R<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut codec_cases = 0;
    for trial in 0..10 {
        let (h, w, b) = (rng.random_range(1..9), rng.random_range(1..9), rng.random_range(1..7));
        let wl: Vec<f64> = (0..b).map(|i| 400.0 + 20.0 * i as f64).collect();
        for dt in DataType::ALL {
            let data: Vec<f32> = (0..h * w * b)
                .map(|_| match dt {
                    DataType::Float32 => rng.random_range(0.0f32..1.0),
                    DataType::Uint16 => rng.random_range(0..=u16::MAX) as f32,
                })
                .collect();
            let cube = Hypercube::new(h, w, wl.clone(), data).map_err(|e| e.to_string())?;
            for il in Interleave::ALL {
                let (hdr, raw) = envi::encode(&cube, CubeFormat { interleave: il, data_type: dt }).map_err(|e| e.to_string())?;
                let parsed = envi::CubeHeader::parse(&hdr.render()).map_err(|e| e.to_string())?;
                let back = envi::decode(&parsed, &raw).map_err(|e| e.to_string())?;
                let bits = |c: &Hypercube| c.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                if bits(&back) != bits(&cube) || back.wavelengths() != cube.wavelengths() {
                    return Ok(verdict(false, format!("codec mismatch: {il:?}/{dt:?} trial {trial}")));
                }
                codec_cases += 1;
            }
        }
    }

    let mut ckpt_ok = true;
    let meta = BTreeMap::from([("data.wavelengths".to_string(), "[520,583]".to_string())]);
    for arch in Arch::ALL {
        let m = build_model(&ModelConfig::toy(arch, 10, 7)).map_err(|e| e.to_string())?;
        let bytes = encode_checkpoint(&m, &meta).map_err(|e| e.to_string())?;
        let back = decode_checkpoint(&bytes).map_err(|e| e.to_string())?;
        ckpt_ok &= back.model == m && back.meta == meta && encode_checkpoint(&back.model, &back.meta).ok() == Some(bytes);
    }

    let m = build_model(&ModelConfig::toy(Arch::Hrnet, 10, 7)).map_err(|e| e.to_string())?;
    let bytes = encode_checkpoint(&m, &meta).map_err(|e| e.to_string())?;
    let mut caught = 0;
    for _ in 0..1000 {
        let mut bad = bytes.clone();
        let i = rng.random_range(0..bad.len());
        bad[i] ^= rng.random_range(1..=255u8);
        if decode_checkpoint(&bad).is_err() {
            caught += 1;
        }
    }
    Ok(verdict(
        codec_cases == 60 && ckpt_ok && caught == 1000,
        format!(
            "{codec_cases} codec round trips bit-exact, checkpoints {} for 4 archs, {caught}/1000 byte flips caught",
            if ckpt_ok { "bit-exact" } else { "MISMATCH" }
        ),
    ))
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()) {
            if entry.is_dir() {
                stack.push(entry);
            } else {
                out.push(entry.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_8(first: &OverfitRuns, root_a: &Path, root_b: &Path) -> R<Verdict> {
    let again = run_overfits()?;
    let overfit_same = first.len() == again.len()
        && first.iter().zip(&again).all(|(a, b)| {
            a.0 == b.0 && a.1.iter().map(|v| v.to_bits()).eq(b.1.iter().map(|v| v.to_bits())) && a.2 == b.2
        });
    run_pipeline(root_b)?;
    let (fa, fb) = (files_under(root_a), files_under(root_b));
    let mut differing: Vec<String> = Vec::new();
    if fa != fb {
        differing.push("file lists differ".into());
    }
    for f in &fa {
        if fs::read(root_a.join(f)).ok() != fs::read(root_b.join(f)).ok() {
            differing.push(f.display().to_string());
        }
    }
    Ok(verdict(
        overfit_same && differing.is_empty(),
        format!(
            "overfit losses+weights {}; {} pipeline artifacts compared, {} differ{}",
            if overfit_same { "identical" } else { "DIFFER" },
            fa.len(),
            differing.len(),
            differing.first().map(|d| format!(" (first: {d})")).unwrap_or_default()
        ),
    ))
}

fn criterion_9() -> R<Verdict> {
    let cfg = PhantomConfig::default();
    let samples = generate(&cfg).map_err(|e| e.to_string())?;
    let mut worst = (f64::INFINITY, String::new());
    for s in &samples {
        let mask = threshold_mask(&s.cube, 700.0, 0.02).map_err(|e| e.to_string())?;
        let iou = mask.iou(&s.mask);
        if iou < worst.0 {
            worst = (iou, s.sample_id.clone());
        }
    }
    Ok(verdict(
        worst.0 >= 0.99,
        format!("{} samples, min IoU {:.4} ({})", samples.len(), worst.0, worst.1),
    ))
}

/// `ACCEPTANCE_ONLY=1,7` restricts the run; unset runs everything.
fn selected() -> Vec<u8> {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').filter_map(|t| t.trim().parse().ok()).collect(),
        Err(_) => (1..=9).collect(),
    }
}

fn main() {
    let want = selected();
    let on = |n: u8| want.contains(&n);
    let work = tempfile::tempdir().expect("temp dir");
    let (root_a, root_b) = (work.path().join("run_a"), work.path().join("run_b"));
    let mut results: Vec<(u8, R<Verdict>)> = Vec::new();

    if on(1) {
        results.push((1, criterion_1()));
    }
    if on(2) {
        results.push((2, criterion_2()));
    }
    let overfits = if on(3) || on(8) { Some(run_overfits()) } else { None };
    if let (true, Some(o)) = (on(3), &overfits) {
        results.push((3, o.as_ref().map(criterion_3).map_err(Clone::clone)));
    }
    if (4..=6).any(on) || on(8) {
        match run_pipeline(&root_a) {
            Ok(times) => {
                let checks: [(u8, &dyn Fn() -> R<Verdict>); 3] = [
                    (4, &|| criterion_4(&root_a, &times)),
                    (5, &|| criterion_5(&root_a)),
                    (6, &|| criterion_6(&root_a, &times)),
                ];
                for (n, check) in checks {
                    if on(n) {
                        results.push((n, check()));
                    }
                }
            }
            Err(e) => (4..=6).filter(|&n| on(n)).for_each(|n| results.push((n, Err(e.clone())))),
        }
    }
    if on(7) {
        results.push((7, criterion_7()));
    }
    if let (true, Some(o)) = (on(8), &overfits) {
        results.push((
            8,
            match o {
                Ok(runs) => criterion_8(runs, &root_a, &root_b),
                Err(e) => Err(e.clone()),
            },
        ));
    }
    if on(9) {
        results.push((9, criterion_9()));
    }

    results.sort_by_key(|(n, _)| *n);
    let mut failed = 0;
    println!();
    for (n, r) in &results {
        match r {
            Ok(v) if v.passed => println!("criterion {n}: PASS  {}", v.detail),
            Ok(v) if v.soft => println!("criterion {n}: WARN  {} (soft check, not a failure)", v.detail),
            Ok(v) => {
                failed += 1;
                println!("criterion {n}: FAIL  {}", v.detail);
            }
            Err(e) => {
                failed += 1;
                println!("criterion {n}: FAIL  error: {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all hard acceptance criteria passed");
}
