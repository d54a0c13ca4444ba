//! Random-data generators and naive reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use noisecal::interchange::{LabeledLogits, LogitRecord};
use noisecal::metrics::{argmax, ConfusionCounts, ProbPredictions};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labeled logits with `n` in `[1, max_n]`, `k` in `[2, max_k]`, and
/// logits scaled per dataset so both sharp and flat rows occur.
pub fn random_logits(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize) -> LabeledLogits {
    let n = rng.random_range(1..=max_n);
    let k = rng.random_range(2..=max_k);
    let spread = rng.random_range(0.1..8.0);
    let records = (0..n)
        .map(|_| {
            let logits = (0..k)
                .map(|_| spread * rng.random_range(-1.0..1.0))
                .collect();
            LogitRecord {
                label: rng.random_range(0..k),
                logits,
            }
        })
        .collect();
    LabeledLogits::new(k, records).unwrap()
}

/// Random probability rows built by normalizing positive weights; with
/// probability 0.2 a row is an exact copy of a bin edge pattern so boundary
/// confidences such as 0.5 and 0.8 appear.
pub fn random_predictions(rng: &mut ChaCha8Rng, max_n: usize, k: usize) -> ProbPredictions {
    let n = rng.random_range(1..=max_n);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = if k == 2 && rng.random_bool(0.2) {
            let c = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0][rng.random_range(0..6)];
            if rng.random_bool(0.5) {
                vec![c, 1.0 - c]
            } else {
                vec![1.0 - c, c]
            }
        } else {
            let w: Vec<f64> = (0..k)
                .map(|_| rng.random_range(0.0..1.0f64).powi(3))
                .collect();
            let s: f64 = w.iter().sum();
            if s == 0.0 {
                let mut r = vec![0.0; k];
                r[0] = 1.0;
                r
            } else {
                w.iter().map(|x| x / s).collect()
            }
        };
        rows.push(row);
        labels.push(rng.random_range(0..k));
    }
    ProbPredictions::new(rows, labels).unwrap()
}

pub fn naive_confusion(preds: &ProbPredictions) -> Vec<Vec<u64>> {
    let k = preds.num_classes();
    let mut counts = vec![vec![0u64; k]; k];
    for (row, &y) in preds.rows().iter().zip(preds.labels()) {
        let mut best = 0;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        counts[y][best] += 1;
    }
    counts
}

/// Direct O(n·M) ECE: for every bin scan every row.
pub fn naive_ece(preds: &ProbPredictions, m: usize) -> f64 {
    let n = preds.len() as f64;
    let mut total = 0.0;
    for b in 0..m {
        let lo = b as f64 / m as f64;
        let hi = (b + 1) as f64 / m as f64;
        let mut count = 0u64;
        let mut sum_conf = 0.0;
        let mut correct = 0u64;
        for (row, &y) in preds.rows().iter().zip(preds.labels()) {
            let conf = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let inside = if b == m - 1 {
                conf >= lo && conf <= hi
            } else {
                conf >= lo && conf < hi
            };
            if inside {
                count += 1;
                sum_conf += conf;
                correct += u64::from(argmax(row) == y);
            }
        }
        if count > 0 {
            let acc = correct as f64 / count as f64;
            let conf = sum_conf / count as f64;
            total += (count as f64 / n) * (acc - conf).abs();
        }
    }
    total
}

/// Logits realizing the given binary confusion cells (class 1 positive).
pub fn binary_fixture(tp: usize, fn_: usize, fp: usize, tn: usize) -> LabeledLogits {
    let mut records = Vec::new();
    let mut push = |label: usize, predicted: usize, count: usize| {
        for i in 0..count {
            let margin = 0.5 + (i % 7) as f64 * 0.3;
            let logits = if predicted == 1 {
                vec![0.0, margin]
            } else {
                vec![margin, 0.0]
            };
            records.push(LogitRecord { label, logits });
        }
    };
    push(1, 1, tp);
    push(1, 0, fn_);
    push(0, 1, fp);
    push(0, 0, tn);
    LabeledLogits::new(2, records).unwrap()
}

pub fn reference_counts() -> ConfusionCounts {
    ConfusionCounts::binary(490, 13, 3, 415)
}

/// Logits whose labels are sampled from `softmax(z / t_true)`, so the
/// NLL-optimal temperature is interior and close to `t_true`.
pub fn tempered_sample(rng: &mut ChaCha8Rng, n: usize, k: usize, t_true: f64) -> LabeledLogits {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = z.iter().map(|v| ((v - m) / t_true).exp()).collect();
        let s: f64 = w.iter().sum();
        let u = rng.random_range(0.0..s);
        let mut acc = 0.0;
        let mut y = k - 1;
        for (j, wj) in w.iter().enumerate() {
            acc += wj;
            if u < acc {
                y = j;
                break;
            }
        }
        rows.push(z);
        labels.push(y);
    }
    LabeledLogits::from_rows(k, &labels, rows).unwrap()
}
