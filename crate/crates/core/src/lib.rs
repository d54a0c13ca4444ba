//! Post-hoc temperature-scaling calibration with noise-robustness benchmarking.
//!
//! The crate is organized along the evaluation pipeline:
//!
//! - [`interchange`]: logits CSV, PGM images, manifests, JSON reports
//! - [`metrics`]: confusion counts, macro precision/recall/F1, NLL, ECE
//! - [`calibration`]: tempered softmax and temperature fitting
//! - [`noise`]: seeded Gaussian, salt & pepper, Poisson, speckle and uniform noise
//! - [`phantom`]: synthetic two-class image data and a small reference classifier
//! - [`cli`]: the `noisecal` command-line front end and the sweep harness

pub mod calibration;
pub mod cli;
pub mod interchange;
pub mod metrics;
pub mod noise;
pub mod phantom;
pub mod rng;
