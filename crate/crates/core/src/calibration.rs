//! Temperature scaling.
//!
//! Logits are divided by a single positive temperature before the softmax.
//! The temperature is fitted by minimizing the mean negative log-likelihood
//! over `[T_MIN, T_MAX]`: a 50-point log-spaced scan locates the bracket,
//! then golden-section search on `ln T` narrows it below `LOG_T_TOL`.
//!
//! The NLL is convex in `1/T`, hence unimodal in `ln T`, so the bracketed
//! search finds the global minimum over the domain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::LabeledLogits;
use crate::metrics::{MetricsError, ProbPredictions};

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
pub const GRID_POINTS: usize = 50;
pub const LOG_T_TOL: f64 = 1e-5;
pub const MAX_EVALUATIONS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("temperature {0} outside [{T_MIN}, {T_MAX}]")]
    OutOfRange(f64),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub const ONE: Temperature = Temperature(1.0);

    pub fn new(value: f64) -> Result<Self, CalibrationError> {
        if (T_MIN..=T_MAX).contains(&value) {
            Ok(Temperature(value))
        } else {
            Err(CalibrationError::OutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn at_bound(self) -> bool {
        self.0 == T_MIN || self.0 == T_MAX
    }
}

impl TryFrom<f64> for Temperature {
    type Error = CalibrationError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Temperature::new(value)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub temperature: Temperature,
    /// Mean NLL at `T = 1`.
    pub nll_before: f64,
    /// Mean NLL at the fitted temperature.
    pub nll_after: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// The optimum sits on an edge of the search domain.
    pub at_bound: bool,
}

/// Softmax of `z / t`, stabilized by subtracting the maximum.
pub fn tempered_softmax(logits: &[f64], t: Temperature) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|z| z / t.0).collect();
    let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Mean NLL of the tempered softmax: `mean(logsumexp(z/T) - z_y/T)`.
pub fn nll_at(data: &LabeledLogits, t: Temperature) -> f64 {
    let inv = 1.0 / t.0;
    let total: f64 = data
        .records()
        .iter()
        .map(|r| log_sum_exp(r.logits.iter().map(|z| z * inv)) - r.logits[r.label] * inv)
        .sum();
    total / data.len() as f64
}

/// d(mean NLL)/dT, averaged from `(z_y - E_p[z]) / T^2` per record.
pub fn nll_gradient(data: &LabeledLogits, t: Temperature) -> f64 {
    let total: f64 = data
        .records()
        .iter()
        .map(|r| {
            let p = tempered_softmax(&r.logits, t);
            let expected: f64 = p.iter().zip(&r.logits).map(|(p, z)| p * z).sum();
            r.logits[r.label] - expected
        })
        .sum();
    total / (data.len() as f64 * t.0 * t.0)
}

pub fn apply_temperature(
    data: &LabeledLogits,
    t: Temperature,
) -> Result<ProbPredictions, CalibrationError> {
    let rows = data
        .records()
        .iter()
        .map(|r| tempered_softmax(&r.logits, t))
        .collect();
    Ok(ProbPredictions::new(rows, data.labels())?)
}

/// `count` log-spaced temperatures spanning the search domain; the endpoints
/// are exactly `T_MIN` and `T_MAX`.
pub fn log_grid(count: usize) -> Vec<f64> {
    assert!(count >= 2);
    let (lo, hi) = (T_MIN.ln(), T_MAX.ln());
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| match i {
            0 => T_MIN,
            i if i == count - 1 => T_MAX,
            i => (lo + step * i as f64).exp(),
        })
        .collect()
}

struct Search<'a> {
    data: &'a LabeledLogits,
    evaluations: usize,
    best_t: f64,
    best_nll: f64,
}

impl Search<'_> {
    fn record(&mut self, t: f64, nll: f64) {
        self.evaluations += 1;
        // strict improvement keeps the earliest point among exact ties
        if nll < self.best_nll {
            self.best_t = t;
            self.best_nll = nll;
        }
    }

    fn eval_log(&mut self, log_t: f64) -> f64 {
        let t = log_t.exp().clamp(T_MIN, T_MAX);
        let nll = nll_at(self.data, Temperature(t));
        self.record(t, nll);
        nll
    }
}

/// Finds the NLL-minimizing temperature over `[T_MIN, T_MAX]`.
///
/// The returned temperature is the best point evaluated anywhere in the
/// search, `T = 1` included, so `nll_after <= nll_before` always holds.
pub fn fit_temperature(data: &LabeledLogits) -> FitResult {
    let nll_before = nll_at(data, Temperature::ONE);
    let mut search = Search {
        data,
        evaluations: 0,
        best_t: 1.0,
        best_nll: f64::INFINITY,
    };
    search.record(1.0, nll_before);

    let grid = log_grid(GRID_POINTS);
    // parallel map, sequential reduction: identical to a serial scan
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&t| nll_at(data, Temperature(t)))
        .collect();
    let mut arg = 0;
    for (i, (&t, &v)) in grid.iter().zip(&values).enumerate() {
        search.record(t, v);
        if v < values[arg] {
            arg = i;
        }
    }

    let mut lo = grid[arg.saturating_sub(1)].ln();
    let mut hi = grid[(arg + 1).min(GRID_POINTS - 1)].ln();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = search.eval_log(x1);
    let mut f2 = search.eval_log(x2);
    let mut converged = true;
    while hi - lo >= LOG_T_TOL {
        if search.evaluations >= MAX_EVALUATIONS {
            converged = false;
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = search.eval_log(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = search.eval_log(x2);
        }
    }

    let temperature = Temperature(search.best_t);
    FitResult {
        temperature,
        nll_before,
        nll_after: search.best_nll,
        evaluations: search.evaluations,
        converged,
        at_bound: temperature.at_bound(),
    }
}
