//! Synthetic two-class image data and a small reference classifier.
//!
//! Class 1 images carry one bright disc over a textured background; class 0
//! images are background only. Images are featurized by 8×8 block means and
//! classified by a one-hidden-layer ReLU network (see [`model`]).

pub mod model;

pub use model::{model_logits, train_ref_model, Gradients, RefModel, TrainParams};

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::GrayImage;
use crate::rng::Seed;

/// Side of the pooled feature grid.
pub const FEATURE_GRID: usize = 8;
pub const FEATURE_DIM: usize = FEATURE_GRID * FEATURE_GRID;

#[derive(Debug, Error, PartialEq)]
pub enum PhantomError {
    #[error("invalid phantom config: {0}")]
    Config(String),
    #[error("image {width}x{height} too small for {FEATURE_GRID}x{FEATURE_GRID} pooling")]
    TooSmall { width: usize, height: usize },
    #[error("training data: {0}")]
    Data(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub n_per_class: usize,
    pub side: usize,
    /// Disc radius range in pixels.
    pub blob_radius: (f64, f64),
    /// Disc intensity range.
    pub blob_intensity: (f64, f64),
    /// Standard deviation of per-pixel background grain.
    pub background_noise_sigma: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            n_per_class: 100,
            side: 64,
            blob_radius: (6.0, 14.0),
            blob_intensity: (0.6, 0.9),
            background_noise_sigma: 0.05,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: &str| Err(PhantomError::Config(m.into()));
        if self.n_per_class < 1 {
            return bad("n_per_class must be >= 1");
        }
        if self.side < 16 {
            return bad("side must be >= 16");
        }
        let (r0, r1) = self.blob_radius;
        if !(r0 > 0.0 && r0 <= r1 && r1.is_finite()) {
            return bad("blob_radius must be a nonempty positive range");
        }
        let (i0, i1) = self.blob_intensity;
        if !(0.0 <= i0 && i0 <= i1 && i1 <= 1.0) {
            return bad("blob_intensity must be a nonempty range within [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.background_noise_sigma) {
            return bad("background_noise_sigma must lie in [0, 1]");
        }
        Ok(())
    }
}

fn uniform_in<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// A smooth background: base level, two low-frequency gratings, a faint
/// soft "structure" blob shared by both classes, and per-pixel grain.
fn render_background<R: Rng>(rng: &mut R, cfg: &PhantomConfig) -> Vec<f64> {
    let side = cfg.side;
    let s = side as f64;
    let base = rng.random_range(0.2..0.45);
    let gratings: Vec<(f64, f64, f64, f64)> = (0..2)
        .map(|_| {
            let angle = rng.random_range(0.0..TAU);
            let freq = rng.random_range(0.5..2.5) / s;
            let phase = rng.random_range(0.0..TAU);
            let amp = rng.random_range(0.02..0.08);
            (angle.cos() * freq, angle.sin() * freq, phase, amp)
        })
        .collect();
    // diffuse bright region, present in both classes as a confounder
    let (sx, sy) = (
        rng.random_range(0.2..0.8) * s,
        rng.random_range(0.2..0.8) * s,
    );
    let spread = rng.random_range(0.12..0.3) * s;
    let lift = rng.random_range(0.0..0.3);
    let grain = Normal::new(0.0, cfg.background_noise_sigma).expect("validated sigma");

    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let (fx, fy) = (x as f64, y as f64);
            let mut v = base;
            for &(kx, ky, phase, amp) in &gratings {
                v += amp * (TAU * (kx * fx + ky * fy) + phase).sin();
            }
            let d2 = (fx - sx).powi(2) + (fy - sy).powi(2);
            v += lift * (-d2 / (2.0 * spread * spread)).exp();
            v += grain.sample(rng);
            pixels.push(v);
        }
    }
    pixels
}

fn render_disc<R: Rng>(rng: &mut R, cfg: &PhantomConfig, pixels: &mut [f64]) {
    let side = cfg.side;
    let radius = uniform_in(rng, cfg.blob_radius).min(side as f64 / 2.0 - 1.0);
    let intensity = uniform_in(rng, cfg.blob_intensity);
    let margin = radius + 1.0;
    let cx = rng.random_range(margin..=side as f64 - margin);
    let cy = rng.random_range(margin..=side as f64 - margin);
    for y in 0..side {
        for x in 0..side {
            let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
            // one-pixel soft edge
            let cover = (radius + 0.5 - d).clamp(0.0, 1.0);
            if cover > 0.0 {
                let p = &mut pixels[y * side + x];
                *p += cover * (intensity - *p);
            }
        }
    }
}

/// Generates `n_per_class` images per class; image `i` has label `i % 2` and
/// draws from stream `i` of `seed`.
pub fn generate_phantoms(
    cfg: &PhantomConfig,
    seed: Seed,
) -> Result<(Vec<GrayImage>, Vec<usize>), PhantomError> {
    cfg.validate()?;
    let total = 2 * cfg.n_per_class;
    let images = (0..total)
        .map(|i| {
            let mut rng = seed.rng(i as u64);
            let mut pixels = render_background(&mut rng, cfg);
            if i % 2 == 1 {
                render_disc(&mut rng, cfg, &mut pixels);
            }
            for p in &mut pixels {
                *p = p.clamp(0.0, 1.0);
            }
            GrayImage::from_clamped(cfg.side, cfg.side, pixels)
        })
        .collect();
    let labels = (0..total).map(|i| i % 2).collect();
    Ok((images, labels))
}

/// Pixel span `[start, end)` of block `b` along an axis of length `len`;
/// the last block absorbs the remainder.
fn block_span(b: usize, len: usize) -> (usize, usize) {
    let size = len / FEATURE_GRID;
    let start = b * size;
    let end = if b == FEATURE_GRID - 1 {
        len
    } else {
        start + size
    };
    (start, end)
}

/// 8×8 block-mean pooling, row-major, 64 values in `[0, 1]`.
pub fn featurize(img: &GrayImage) -> Result<Vec<f64>, PhantomError> {
    let (w, h) = (img.width(), img.height());
    if w < FEATURE_GRID || h < FEATURE_GRID {
        return Err(PhantomError::TooSmall {
            width: w,
            height: h,
        });
    }
    let mut features = Vec::with_capacity(FEATURE_DIM);
    for by in 0..FEATURE_GRID {
        let (y0, y1) = block_span(by, h);
        for bx in 0..FEATURE_GRID {
            let (x0, x1) = block_span(bx, w);
            let mut sum = 0.0;
            for y in y0..y1 {
                sum += img.pixels()[y * w + x0..y * w + x1].iter().sum::<f64>();
            }
            features.push(sum / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    Ok(features)
}

/// Index sets of a three-way split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits indices per class in order: the first `round(train·n_c)` of each
/// class go to train, the next `round(val·n_c)` to validation, the rest to
/// test. Each part keeps ascending index order.
pub fn stratified_split(labels: &[usize], train: f64, val: f64) -> Split {
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut split = Split {
        train: vec![],
        val: vec![],
        test: vec![],
    };
    let mut assignment = vec![0u8; labels.len()];
    for class in 0..num_classes {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let n = members.len() as f64;
        let n_train = (train * n).round() as usize;
        let n_val = ((val * n).round() as usize).min(members.len() - n_train.min(members.len()));
        for (rank, &i) in members.iter().enumerate() {
            assignment[i] = if rank < n_train {
                0
            } else if rank < n_train + n_val {
                1
            } else {
                2
            };
        }
    }
    for (i, a) in assignment.into_iter().enumerate() {
        match a {
            0 => split.train.push(i),
            1 => split.val.push(i),
            _ => split.test.push(i),
        }
    }
    split
}
