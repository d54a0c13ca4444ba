//! Noise-robustness sweep: one clean-trained reference model, evaluated on
//! validation/test images corrupted by each noise setting, before and after
//! temperature scaling.

use std::fmt::Write as _;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{apply_temperature, fit_temperature, Temperature, T_MAX, T_MIN};
use crate::interchange::{GrayImage, LabeledLogits};
use crate::metrics::{self, ConfusionCounts};
use crate::noise::NoiseSpec;
use crate::phantom::{
    featurize, generate_phantoms, model_logits, stratified_split, train_ref_model, PhantomConfig,
    RefModel, TrainParams,
};
use crate::rng::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub grid: Vec<NoiseSpec>,
    pub ece_bins: usize,
    pub data_seed: u64,
    pub noise_seed: u64,
    pub train_seed: u64,
    /// Train / validation / test fractions.
    pub split: (f64, f64, f64),
    pub phantom: PhantomConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: usize,
}

/// The 19 settings of the Gaussian, Poisson, salt & pepper, speckle and
/// uniform noise tables, in table order.
pub fn default_grid() -> Vec<NoiseSpec> {
    let mut grid = Vec::new();
    for (mu, sigma) in [
        (0.0, 0.02),
        (0.0, 0.05),
        (0.0, 0.1),
        (0.0, 0.2),
        (0.1, 0.2),
        (0.1, 0.3),
        (0.2, 0.3),
    ] {
        grid.push(NoiseSpec::Gaussian { mu, sigma });
    }
    for scale in [0.5, 1.0, 2.0] {
        grid.push(NoiseSpec::Poisson { scale });
    }
    for p in [0.02, 0.1, 0.2] {
        grid.push(NoiseSpec::SaltPepper {
            salt_prob: p,
            pepper_prob: p,
        });
    }
    for scale in [0.01, 0.05, 0.1] {
        grid.push(NoiseSpec::Speckle { scale });
    }
    for scale in [0.02, 0.05, 0.1] {
        grid.push(NoiseSpec::Uniform { scale });
    }
    grid
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: default_grid(),
            ece_bins: super::DEFAULT_ECE_BINS,
            data_seed: 20_240_601,
            noise_seed: 7,
            train_seed: 11,
            split: (0.6, 0.2, 0.2),
            phantom: PhantomConfig {
                n_per_class: 2000,
                ..PhantomConfig::default()
            },
            epochs: 300,
            learning_rate: 0.1,
            batch_size: 32,
            hidden: 64,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.grid.is_empty(), "noise grid is empty");
        for spec in &self.grid {
            spec.validate()?;
        }
        ensure!(self.ece_bins >= 1, "ece_bins must be >= 1");
        let (a, b, c) = self.split;
        ensure!(
            a > 0.0 && b > 0.0 && c > 0.0,
            "split fractions must be positive"
        );
        ensure!(
            (a + b + c - 1.0).abs() <= 1e-9,
            "split fractions must sum to 1"
        );
        self.phantom.validate()?;
        ensure!(
            self.phantom.n_per_class >= 5,
            "n_per_class must be >= 5 for a three-way split"
        );
        ensure!(
            self.batch_size >= 1 && self.hidden >= 1,
            "batch_size and hidden must be >= 1"
        );
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be positive"
        );
        Ok(())
    }

    fn train_params(&self) -> TrainParams {
        TrainParams {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            hidden: self.hidden,
            seed: Seed(self.train_seed),
        }
    }
}

/// One line of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub noise: String,
    pub calibrated: bool,
    pub prec: f64,
    pub rec: f64,
    pub f1: f64,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub nll: f64,
    pub ece: f64,
    /// Set on the calibrated row only.
    pub optimal_temp: Option<f64>,
}

impl SweepRow {
    fn from_logits(
        noise: &NoiseSpec,
        logits: &LabeledLogits,
        temperature: Option<Temperature>,
        ece_bins: usize,
    ) -> Result<Self> {
        let preds = apply_temperature(logits, temperature.unwrap_or(Temperature::ONE))?;
        let confusion: ConfusionCounts = metrics::confusion_matrix(&preds);
        let (tp, fn_, fp, tn) = confusion
            .binary_cells()
            .context("sweep rows need a binary task")?;
        Ok(SweepRow {
            noise: noise.to_string(),
            calibrated: temperature.is_some(),
            prec: metrics::precision_macro(&confusion),
            rec: metrics::recall_macro(&confusion),
            f1: metrics::f1_macro(&confusion),
            tp,
            fn_,
            fp,
            tn,
            nll: metrics::mean_nll(&preds),
            ece: metrics::ece(&preds, ece_bins)?,
            optimal_temp: temperature.map(Temperature::value),
        })
    }
}

/// Clean data and trained model shared by every sweep setting.
pub struct SweepFixture {
    pub images: Vec<GrayImage>,
    pub labels: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub model: RefModel,
}

pub fn prepare(cfg: &SweepConfig) -> Result<SweepFixture> {
    cfg.validate()?;
    let (images, labels) = generate_phantoms(&cfg.phantom, Seed(cfg.data_seed))?;
    let split = stratified_split(&labels, cfg.split.0, cfg.split.1);
    ensure!(
        !split.val.is_empty() && !split.test.is_empty(),
        "split leaves an empty validation or test set"
    );
    let train_x = split
        .train
        .par_iter()
        .map(|&i| featurize(&images[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let train_y: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let model = train_ref_model(&train_x, &train_y, cfg.train_params())?;
    Ok(SweepFixture {
        images,
        labels,
        val: split.val,
        test: split.test,
        model,
    })
}

/// Logits for the images at `indices` after noise; each image draws from
/// the stream of its dataset index.
pub fn noisy_logits(
    fixture: &SweepFixture,
    indices: &[usize],
    spec: &NoiseSpec,
    seed: Seed,
) -> Result<LabeledLogits> {
    let features = indices
        .par_iter()
        .map(|&i| featurize(&spec.apply(&fixture.images[i], seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<usize> = indices.iter().map(|&i| fixture.labels[i]).collect();
    Ok(model_logits(&fixture.model, &features, &labels)?)
}

/// Two rows per setting (uncalibrated, calibrated), in grid order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let fixture = prepare(cfg)?;
    let per_setting: Vec<Result<[SweepRow; 2]>> = cfg
        .grid
        .par_iter()
        .enumerate()
        .map(|(j, spec)| {
            let seed = Seed(cfg.noise_seed).derive(j as u64);
            let val = noisy_logits(&fixture, &fixture.val, spec, seed)?;
            let test = noisy_logits(&fixture, &fixture.test, spec, seed)?;
            let fit = fit_temperature(&val);
            let before = SweepRow::from_logits(spec, &test, None, cfg.ece_bins)?;
            let after = SweepRow::from_logits(spec, &test, Some(fit.temperature), cfg.ece_bins)?;
            Ok([before, after])
        })
        .collect();
    let mut rows = Vec::with_capacity(2 * cfg.grid.len());
    for r in per_setting {
        rows.extend(r?);
    }
    for pair in rows.chunks(2) {
        let cells = |r: &SweepRow| (r.tp, r.fn_, r.fp, r.tn);
        if cells(&pair[0]) != cells(&pair[1]) {
            bail!("confusion counts changed under temperature scaling");
        }
        if let Some(t) = pair[1].optimal_temp {
            ensure!((T_MIN..=T_MAX).contains(&t), "temperature {t} out of range");
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "noise,calibrated,prec,rec,f1,tp,fn,fp,tn,nll,ece,optimal_temp";

/// Full-precision CSV (shortest round-trip representation of each real).
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let temp = r.optimal_temp.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.noise, r.calibrated, r.prec, r.rec, r.f1, r.tp, r.fn_, r.fp, r.tn, r.nll, r.ece, temp
        );
    }
    out
}

/// Rounds to the nearest multiple of 0.005.
pub fn round_to_half_cent(x: f64) -> f64 {
    (x * 200.0).round() / 200.0
}

/// Human-readable table: rates on a 0.005 grid, NLL/ECE/temperature to 3
/// decimals.
pub fn rows_to_markdown(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "| Noise | Strategy | Prec | Rec | F1 | TP | FN | FP | TN | NLL | ECE | Optimal Temp |\n\
         |---|---|---|---|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let strategy = if r.calibrated {
            "Calibrated"
        } else {
            "Uncalibrated"
        };
        let temp = r
            .optimal_temp
            .map(|t| format!("{t:.3}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "| {} | {} | {:.3} | {:.3} | {:.3} | {} | {} | {} | {} | {:.3} | {:.3} | {} |",
            r.noise,
            strategy,
            round_to_half_cent(r.prec),
            round_to_half_cent(r.rec),
            round_to_half_cent(r.f1),
            r.tp,
            r.fn_,
            r.fp,
            r.tn,
            r.nll,
            r.ece,
            temp
        );
    }
    out
}
