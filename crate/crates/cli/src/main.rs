use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};
use serde_json::json;

use hsrecon::segmentation::{ExtractOptions, DEFAULT_REF_NM, DEFAULT_THRESHOLD};

mod commands;
mod config;
mod svg;

use commands::{ClassifyArgs, ReconstructArgs, TrainArgs};
use config::Settings;

/// RGB to hyperspectral reconstruction and egg viability classification.
#[derive(Parser)]
#[command(name = "hsrecon", version)]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with [phantom], [train], [model], [forest] and [boost] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic egg dataset.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
    },
    /// Render a cube as a 3-band RGB image.
    PseudoRgb {
        cube: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select the training bands of a cube.
    MakeLabels {
        cube: PathBuf,
        /// Comma-separated wavelengths in nm.
        #[arg(long)]
        bands: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a reconstruction network.
    Train {
        #[arg(long)]
        arch: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Reconstruct cubes from RGB with a trained checkpoint.
    Reconstruct {
        #[arg(long)]
        checkpoint: PathBuf,
        /// A single RGB image (PPM).
        #[arg(conflicts_with = "data", required_unless_present = "data")]
        image: Option<PathBuf>,
        /// Dataset root; every manifest sample (or one split) is reconstructed.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        split: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted cubes against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        data_range: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment each cube and write its mean spectrum.
    ExtractSpectra {
        cube_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_REF_NM)]
        ref_nm: f64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f32,
        #[arg(long)]
        no_largest_component: bool,
    },
    /// Cross-validate a viability classifier on extracted spectra.
    Classify {
        #[arg(long)]
        spectra: PathBuf,
        /// rf or gbt
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        no_smote: bool,
        #[arg(long)]
        smote_before_cv: bool,
        #[arg(long, default_value_t = hsrecon::classify::DEFAULT_K_NEIGHBORS)]
        k_neighbors: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare mean spectra of two tables.
    CompareSpectra {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_svg: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = Settings::load(cli.config.as_deref(), cli.seed)?;
    let summary = match cli.command {
        Command::GenSynthetic { out, n_samples, height, width } => {
            let settings = settings.with_phantom_overrides(n_samples, height, width);
            commands::gen_synthetic(&settings, &out)?
        }
        Command::PseudoRgb { cube, out } => commands::pseudo_rgb(&cube, &out)?,
        Command::MakeLabels { cube, bands, out } => commands::make_labels(&cube, bands.as_deref(), &out)?,
        Command::Train { arch, data, out, epochs, iterations } => commands::train_cmd(
            &settings,
            TrainArgs { arch: &arch, data: &data, out: &out, epochs, iterations },
        )?,
        Command::Reconstruct { checkpoint, image, data, split, out } => commands::reconstruct(ReconstructArgs {
            checkpoint: &checkpoint,
            input: image.as_deref(),
            data: data.as_deref(),
            split: split.as_deref(),
            out: &out,
        })?,
        Command::Evaluate { pred, gt, data_range, out } => {
            commands::evaluate(&pred, &gt, data_range, out.as_deref())?;
            return Ok(());
        }
        Command::ExtractSpectra { cube_dir, out, manifest, ref_nm, threshold, no_largest_component } => {
            let opts = ExtractOptions { ref_nm, threshold, largest_component: !no_largest_component };
            commands::extract_spectra(&cube_dir, manifest.as_deref(), opts, &out)?
        }
        Command::Classify { spectra, method, folds, no_smote, smote_before_cv, k_neighbors, out } => {
            commands::classify(
                &settings,
                ClassifyArgs {
                    spectra: &spectra,
                    method: &method,
                    folds,
                    no_smote,
                    smote_before_cv,
                    k_neighbors,
                    out: out.as_deref(),
                },
            )?;
            return Ok(());
        }
        Command::CompareSpectra { pred, gt, out_csv, out_svg } => {
            commands::compare_spectra(&pred, &gt, &out_csv, &out_svg)?
        }
    };
    commands::print_stdout(&summary.to_string());
    Ok(())
}

fn error_json(kind: &str, message: &str) -> String {
    json!({"error": {"kind": kind, "message": message}}).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_json("usage", first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json("runtime", &format!("{e:#}")));
            ExitCode::from(1)
        }
    }
}
