//! `noisecal` command-line front end.
//!
//! Every subcommand exits 0 on success and 2 on usage or input errors.
//! Machine-readable results go to files; progress and summaries go to
//! stdout, diagnostics to stderr.

pub mod svg;
pub mod sweep;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::calibration::{apply_temperature, fit_temperature, Temperature};
use crate::interchange::{
    read_logits_csv, read_manifest, read_pgm, write_logits_csv, write_manifest, write_pgm,
    write_report_json, DatasetManifest, ManifestEntry,
};
use crate::metrics::{build_report, reliability_bins};
use crate::noise::NoiseSpec;
use crate::phantom::{
    featurize, generate_phantoms, model_logits, train_ref_model, PhantomConfig, RefModel,
    TrainParams,
};
use crate::rng::Seed;

pub use sweep::{run_sweep, SweepConfig, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const DEFAULT_ECE_BINS: usize = 15;

#[derive(Debug, Parser)]
#[command(
    name = "noisecal",
    version,
    about = "Temperature-scaling calibration under image noise"
)]
pub struct Cli {
    /// Base seed for data generation, noise and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of equal-width confidence bins for ECE [default: 15].
    #[arg(long, global = true)]
    pub ece_bins: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-class phantom dataset (PGM images + manifest).
    GenData {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        n_per_class: usize,
        #[arg(long, default_value_t = 64)]
        side: usize,
    },
    /// Corrupt every image of a manifest with seeded noise.
    InjectNoise {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Train the reference classifier on a manifest and save it as JSON.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
    },
    /// Write the logits of a saved model on a manifest's images.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a temperature on validation logits.
    Calibrate {
        #[arg(long)]
        logits: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the metrics report for test logits, optionally tempered.
    Evaluate {
        #[arg(long)]
        logits: PathBuf,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        reliability_svg: Option<PathBuf>,
    },
    /// Run the full noise grid and write CSV and markdown tables.
    Sweep {
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_md: PathBuf,
        /// JSON sweep configuration; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_per_class: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    Gaussian,
    SaltPepper,
    Poisson,
    Speckle,
    Uniform,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, value_enum)]
    pub noise: NoiseKind,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub salt_prob: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub pepper_prob: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub scale: Option<f64>,
}

impl NoiseArgs {
    pub fn to_spec(&self) -> Result<NoiseSpec> {
        let need = |v: Option<f64>, flag: &str| {
            v.with_context(|| format!("--noise {:?} requires --{flag}", self.noise))
        };
        let spec = match self.noise {
            NoiseKind::Gaussian => NoiseSpec::Gaussian {
                mu: self.mu.unwrap_or(0.0),
                sigma: need(self.sigma, "sigma")?,
            },
            NoiseKind::SaltPepper => NoiseSpec::SaltPepper {
                salt_prob: need(self.salt_prob, "salt-prob")?,
                pepper_prob: need(self.pepper_prob, "pepper-prob")?,
            },
            NoiseKind::Poisson => NoiseSpec::Poisson {
                scale: need(self.scale, "scale")?,
            },
            NoiseKind::Speckle => NoiseSpec::Speckle {
                scale: need(self.scale, "scale")?,
            },
            NoiseKind::Uniform => NoiseSpec::Uniform {
                scale: need(self.scale, "scale")?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let seed = Seed(cli.seed.unwrap_or(0));
    match &cli.command {
        Command::GenData {
            out_dir,
            n_per_class,
            side,
        } => cmd_gen_data(out_dir, *n_per_class, *side, seed),
        Command::InjectNoise {
            manifest,
            out_dir,
            noise,
        } => {
            let spec = noise.to_spec().map_err(|e| {
                let usage = Cli::command().render_usage();
                anyhow::anyhow!("{e:#}\n\n{usage}")
            })?;
            cmd_inject_noise(manifest, out_dir, &spec, seed)
        }
        Command::Train {
            manifest,
            out,
            epochs,
            lr,
            batch_size,
            hidden,
        } => {
            let params = TrainParams {
                epochs: *epochs,
                learning_rate: *lr,
                batch_size: *batch_size,
                hidden: *hidden,
                seed,
            };
            cmd_train(manifest, out, params)
        }
        Command::Predict {
            model,
            manifest,
            out,
        } => cmd_predict(model, manifest, out),
        Command::Calibrate { logits, out } => cmd_calibrate(logits, out),
        Command::Evaluate {
            logits,
            temperature,
            report,
            reliability_svg,
        } => cmd_evaluate(
            logits,
            *temperature,
            cli.ece_bins.unwrap_or(DEFAULT_ECE_BINS),
            report,
            reliability_svg.as_deref(),
        ),
        Command::Sweep {
            out_csv,
            out_md,
            config,
            n_per_class,
            epochs,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                None => SweepConfig::default(),
            };
            if let Some(m) = cli.ece_bins {
                cfg.ece_bins = m;
            }
            if let Some(s) = cli.seed {
                let base = Seed(s);
                cfg.data_seed = base.stream_seed(0);
                cfg.noise_seed = base.stream_seed(1);
                cfg.train_seed = base.stream_seed(2);
            }
            if let Some(n) = n_per_class {
                cfg.phantom.n_per_class = *n;
            }
            if let Some(e) = epochs {
                cfg.epochs = *e;
            }
            cmd_sweep(&cfg, out_csv, out_md)
        }
    }
}

fn image_name(i: usize) -> String {
    format!("img_{i:05}.pgm")
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn cmd_gen_data(out_dir: &Path, n_per_class: usize, side: usize, seed: Seed) -> Result<()> {
    let cfg = PhantomConfig {
        n_per_class,
        side,
        ..PhantomConfig::default()
    };
    let (images, labels) = generate_phantoms(&cfg, seed)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut entries = Vec::with_capacity(images.len());
    for (i, (img, &label)) in images.iter().zip(&labels).enumerate() {
        let name = image_name(i);
        write_pgm(img, out_dir.join(&name))?;
        entries.push(ManifestEntry { path: name, label });
    }
    write_manifest(
        &DatasetManifest::new(entries)?,
        out_dir.join("manifest.csv"),
    )?;
    println!(
        "wrote {} images ({} per class) to {}",
        images.len(),
        n_per_class,
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_inject_noise(
    manifest_path: &Path,
    out_dir: &Path,
    spec: &NoiseSpec,
    seed: Seed,
) -> Result<()> {
    spec.validate()?;
    let manifest = read_manifest(manifest_path)?;
    let src = manifest_dir(manifest_path);
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    manifest
        .entries()
        .par_iter()
        .enumerate()
        .try_for_each(|(i, e)| -> Result<()> {
            let img = read_pgm(src.join(&e.path))?;
            let noisy = spec.apply(&img, seed, i as u64);
            write_pgm(&noisy, out_dir.join(&e.path))?;
            Ok(())
        })?;
    write_manifest(&manifest, out_dir.join("manifest.csv"))?;
    println!("injected {spec} into {} images", manifest.len());
    Ok(())
}

fn load_features(manifest_path: &Path) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let manifest = read_manifest(manifest_path)?;
    let src = manifest_dir(manifest_path);
    let features = manifest
        .entries()
        .par_iter()
        .map(|e| -> Result<Vec<f64>> { Ok(featurize(&read_pgm(src.join(&e.path))?)?) })
        .collect::<Result<Vec<_>>>()?;
    Ok((features, manifest.labels()))
}

pub fn cmd_train(manifest: &Path, out: &Path, params: TrainParams) -> Result<()> {
    let (features, labels) = load_features(manifest)?;
    let model = train_ref_model(&features, &labels, params)?;
    let json = serde_json::to_string_pretty(&model)?;
    fs::write(out, json + "\n").with_context(|| format!("writing {}", out.display()))?;
    println!(
        "trained on {} images for {} epochs",
        labels.len(),
        params.epochs
    );
    Ok(())
}

pub fn cmd_predict(model_path: &Path, manifest: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let model: RefModel =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", model_path.display()))?;
    let (features, labels) = load_features(manifest)?;
    let logits = model_logits(&model, &features, &labels)?;
    write_logits_csv(&logits, out)?;
    println!("wrote {} logit rows", logits.len());
    Ok(())
}

pub fn cmd_calibrate(logits_path: &Path, out: &Path) -> Result<()> {
    let data = read_logits_csv(logits_path)?;
    let fit = fit_temperature(&data);
    let json = serde_json::to_string_pretty(&fit)?;
    fs::write(out, json + "\n").with_context(|| format!("writing {}", out.display()))?;
    println!("{:.3}", fit.temperature.value());
    if fit.at_bound {
        eprintln!("note: optimum lies on the search bound");
    }
    Ok(())
}

pub fn cmd_evaluate(
    logits_path: &Path,
    temperature: Option<f64>,
    ece_bins: usize,
    report_path: &Path,
    svg_path: Option<&Path>,
) -> Result<()> {
    if ece_bins == 0 {
        bail!("--ece-bins must be >= 1");
    }
    let t = match temperature {
        Some(v) => Temperature::new(v)?,
        None => Temperature::ONE,
    };
    let data = read_logits_csv(logits_path)?;
    let preds = apply_temperature(&data, t)?;
    let report = build_report(&preds, ece_bins, temperature)?;
    write_report_json(&report, report_path)?;
    if let Some(svg_path) = svg_path {
        let bins = reliability_bins(&preds, ece_bins)?;
        let title = format!(
            "Reliability (T = {:.3}, ECE = {:.4})",
            t.value(),
            report.ece
        );
        fs::write(svg_path, svg::reliability_svg(&bins, &title))
            .with_context(|| format!("writing {}", svg_path.display()))?;
    }
    println!(
        "accuracy {:.4}  macro-F1 {:.4}  NLL {:.4}  ECE {:.4}",
        report.accuracy, report.macro_f1, report.nll, report.ece
    );
    Ok(())
}

pub fn cmd_sweep(cfg: &SweepConfig, out_csv: &Path, out_md: &Path) -> Result<()> {
    let rows = run_sweep(cfg)?;
    let csv = sweep::rows_to_csv(&rows);
    let md = sweep::rows_to_markdown(&rows);
    fs::write(out_csv, csv).with_context(|| format!("writing {}", out_csv.display()))?;
    fs::write(out_md, md).with_context(|| format!("writing {}", out_md.display()))?;
    println!("{} rows over {} noise settings", rows.len(), cfg.grid.len());
    Ok(())
}
