//! Classification and calibration metrics over probability predictions.
//!
//! Conventions:
//! - predicted class is the argmax, ties broken toward the smaller index
//! - precision, recall and F1 are macro averages; a class with no predicted
//!   (or no actual) instances contributes 0
//! - NLL is a per-record mean with probabilities clamped at `1e-12`
//! - reliability bins are equal-width on `[0, 1]`, half-open except the last

use thiserror::Error;

use crate::interchange::{BinStat, ClassStat, ConfusionReport, MetricsReport};

/// Floor applied to the true-class probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on row sums accepted by [`ProbPredictions::new`].
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no predictions")]
    Empty,
    #[error("row {row}: expected {expected} probabilities, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("{labels} labels for {rows} rows")]
    LengthMismatch { labels: usize, rows: usize },
    #[error("need at least one bin")]
    ZeroBins,
}

/// Row-stochastic class probabilities with their true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbPredictions {
    num_classes: usize,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl ProbPredictions {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, MetricsError> {
        if rows.is_empty() {
            return Err(MetricsError::Empty);
        }
        if rows.len() != labels.len() {
            return Err(MetricsError::LengthMismatch {
                labels: labels.len(),
                rows: rows.len(),
            });
        }
        let num_classes = rows[0].len();
        for (i, (row, &label)) in rows.iter().zip(&labels).enumerate() {
            if row.len() != num_classes {
                return Err(MetricsError::Ragged {
                    row: i,
                    expected: num_classes,
                    found: row.len(),
                });
            }
            if label >= num_classes {
                return Err(MetricsError::BadRow {
                    row: i,
                    reason: format!("label {label} out of range"),
                });
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(MetricsError::BadRow {
                    row: i,
                    reason: "probability outside [0, 1]".into(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MetricsError::BadRow {
                    row: i,
                    reason: format!("row sums to {sum}"),
                });
            }
        }
        Ok(ProbPredictions {
            num_classes,
            rows,
            labels,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn predicted(&self) -> Vec<usize> {
        self.rows.iter().map(|r| argmax(r)).collect()
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Prediction-vs-truth counts: `counts[t][p]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    num_classes: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionCounts {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let k = counts.len();
        assert!(k >= 2, "need at least two classes");
        assert!(counts.iter().all(|r| r.len() == k), "counts must be square");
        ConfusionCounts {
            num_classes: k,
            counts,
        }
    }

    /// Binary confusion matrix with class 1 as the positive class.
    pub fn binary(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self::from_counts(vec![vec![tn, fp], vec![fn_, tp]])
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn diagonal(&self, k: usize) -> u64 {
        self.counts[k][k]
    }

    fn predicted_total(&self, k: usize) -> u64 {
        self.counts.iter().map(|row| row[k]).sum()
    }

    fn support(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    /// `(tp, fn, fp, tn)` for a binary task.
    pub fn binary_cells(&self) -> Option<(u64, u64, u64, u64)> {
        (self.num_classes == 2).then(|| {
            (
                self.counts[1][1],
                self.counts[1][0],
                self.counts[0][1],
                self.counts[0][0],
            )
        })
    }

    pub fn class_precision(&self, k: usize) -> f64 {
        ratio(self.diagonal(k), self.predicted_total(k))
    }

    pub fn class_recall(&self, k: usize) -> f64 {
        ratio(self.diagonal(k), self.support(k))
    }

    pub fn class_f1(&self, k: usize) -> f64 {
        harmonic(self.class_precision(k), self.class_recall(k))
    }

    pub fn per_class(&self) -> Vec<ClassStat> {
        (0..self.num_classes)
            .map(|k| ClassStat {
                class: k,
                precision: self.class_precision(k),
                recall: self.class_recall(k),
                f1: self.class_f1(k),
                support: self.support(k),
            })
            .collect()
    }

    pub fn to_report(&self) -> ConfusionReport {
        let cells = self.binary_cells();
        ConfusionReport {
            num_classes: self.num_classes,
            counts: self.counts.clone(),
            tp: cells.map(|c| c.0),
            fn_: cells.map(|c| c.1),
            fp: cells.map(|c| c.2),
            tn: cells.map(|c| c.3),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn confusion_matrix(preds: &ProbPredictions) -> ConfusionCounts {
    let k = preds.num_classes;
    let mut counts = vec![vec![0u64; k]; k];
    for (row, &label) in preds.rows.iter().zip(&preds.labels) {
        counts[label][argmax(row)] += 1;
    }
    ConfusionCounts {
        num_classes: k,
        counts,
    }
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    let correct: u64 = (0..c.num_classes).map(|k| c.diagonal(k)).sum();
    ratio(correct, c.total())
}

fn macro_mean(c: &ConfusionCounts, per_class: impl Fn(usize) -> f64) -> f64 {
    (0..c.num_classes).map(per_class).sum::<f64>() / c.num_classes as f64
}

pub fn precision_macro(c: &ConfusionCounts) -> f64 {
    macro_mean(c, |k| c.class_precision(k))
}

pub fn recall_macro(c: &ConfusionCounts) -> f64 {
    macro_mean(c, |k| c.class_recall(k))
}

pub fn f1_macro(c: &ConfusionCounts) -> f64 {
    macro_mean(c, |k| c.class_f1(k))
}

/// Mean negative log-probability of the true class.
pub fn mean_nll(preds: &ProbPredictions) -> f64 {
    let total: f64 = preds
        .rows
        .iter()
        .zip(&preds.labels)
        .map(|(row, &y)| -row[y].max(PROB_FLOOR).ln())
        .sum();
    total / preds.len() as f64
}

/// Accumulated statistics for one confidence bin.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bin {
    pub count: u64,
    pub sum_confidence: f64,
    pub sum_correct: u64,
}

impl Bin {
    pub fn accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_correct as f64 / self.count as f64)
    }

    pub fn confidence(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_confidence / self.count as f64)
    }
}

/// `M` equal-width confidence bins. Bin `m` (0-based) covers
/// `[m/M, (m+1)/M)`; the last bin also includes 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityBins {
    bins: Vec<Bin>,
    n: u64,
}

impl ReliabilityBins {
    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    /// Lower edge of bin `m`, computed as `m / M`.
    pub fn edge(m: usize, num_bins: usize) -> f64 {
        m as f64 / num_bins as f64
    }

    /// Bin index for a confidence value under the half-open rule.
    pub fn bin_index(confidence: f64, num_bins: usize) -> usize {
        let last = num_bins - 1;
        let mut m = ((confidence * num_bins as f64).floor().max(0.0) as usize).min(last);
        // settle floating-point disagreements between c*M and the edges m/M
        while m > 0 && confidence < Self::edge(m, num_bins) {
            m -= 1;
        }
        while m < last && confidence >= Self::edge(m + 1, num_bins) {
            m += 1;
        }
        m
    }

    pub fn ece(&self) -> f64 {
        let n = self.n as f64;
        self.bins
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| {
                let acc = b.sum_correct as f64 / b.count as f64;
                let conf = b.sum_confidence / b.count as f64;
                (b.count as f64 / n) * (acc - conf).abs()
            })
            .sum()
    }

    pub fn to_stats(&self) -> Vec<BinStat> {
        self.bins
            .iter()
            .map(|b| BinStat {
                count: b.count,
                mean_confidence: b.confidence(),
                mean_accuracy: b.accuracy(),
            })
            .collect()
    }
}

/// Maximum class probability of a row.
pub fn confidence(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn reliability_bins(
    preds: &ProbPredictions,
    num_bins: usize,
) -> Result<ReliabilityBins, MetricsError> {
    if num_bins == 0 {
        return Err(MetricsError::ZeroBins);
    }
    let mut bins = vec![Bin::default(); num_bins];
    for (row, &label) in preds.rows.iter().zip(&preds.labels) {
        let conf = confidence(row);
        let bin = &mut bins[ReliabilityBins::bin_index(conf, num_bins)];
        bin.count += 1;
        bin.sum_confidence += conf;
        bin.sum_correct += u64::from(argmax(row) == label);
    }
    Ok(ReliabilityBins {
        bins,
        n: preds.len() as u64,
    })
}

pub fn ece(preds: &ProbPredictions, num_bins: usize) -> Result<f64, MetricsError> {
    Ok(reliability_bins(preds, num_bins)?.ece())
}

/// Full evaluation summary for a set of predictions.
pub fn build_report(
    preds: &ProbPredictions,
    num_bins: usize,
    temperature: Option<f64>,
) -> Result<MetricsReport, MetricsError> {
    let confusion = confusion_matrix(preds);
    let bins = reliability_bins(preds, num_bins)?;
    Ok(MetricsReport {
        n: preds.len() as u64,
        accuracy: accuracy(&confusion),
        macro_precision: precision_macro(&confusion),
        macro_recall: recall_macro(&confusion),
        macro_f1: f1_macro(&confusion),
        confusion: confusion.to_report(),
        nll: mean_nll(preds),
        ece: bins.ece(),
        temperature,
        ece_bins: num_bins,
        bin_stats: bins.to_stats(),
        per_class: confusion.per_class(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> ProbPredictions {
        ProbPredictions::new(rows, labels).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn confusion_single_row() {
        let c = confusion_matrix(&preds(vec![vec![0.9, 0.1]], vec![0]));
        assert_eq!(c.counts(), &[vec![1, 0], vec![0, 0]]);
    }

    #[test]
    fn tie_goes_to_smallest_index() {
        let c = confusion_matrix(&preds(vec![vec![0.5, 0.5]], vec![1]));
        assert_eq!(c.get(1, 0), 1);
        assert_eq!(c.total(), 1);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn binary_cell_layout() {
        let c = ConfusionCounts::binary(490, 13, 3, 415);
        assert_eq!(c.binary_cells(), Some((490, 13, 3, 415)));
        assert_eq!(c.get(1, 1), 490);
        assert_eq!(c.get(1, 0), 13);
        assert_eq!(c.get(0, 1), 3);
        assert_eq!(c.get(0, 0), 415);
    }

    #[test]
    fn table_cell_arithmetic() {
        let c = ConfusionCounts::binary(490, 13, 3, 415);
        close(accuracy(&c), 905.0 / 921.0, 1e-15);
        close(
            precision_macro(&c),
            (490.0 / 493.0 + 415.0 / 428.0) / 2.0,
            1e-15,
        );
        close(
            recall_macro(&c),
            (490.0 / 503.0 + 415.0 / 418.0) / 2.0,
            1e-15,
        );
        close(accuracy(&c), 0.98263, 5e-6);
        close(precision_macro(&c), 0.98177, 5e-6);
        close(recall_macro(&c), 0.98349, 5e-6);
        close(f1_macro(&c), 0.98251, 5e-6);
    }

    #[test]
    fn degenerate_counts() {
        let perfect = ConfusionCounts::binary(7, 0, 0, 5);
        assert_eq!(accuracy(&perfect), 1.0);
        assert_eq!(precision_macro(&perfect), 1.0);
        assert_eq!(recall_macro(&perfect), 1.0);
        assert_eq!(f1_macro(&perfect), 1.0);

        let wrong = ConfusionCounts::binary(0, 5, 5, 0);
        assert_eq!(accuracy(&wrong), 0.0);
        assert_eq!(f1_macro(&wrong), 0.0);

        // class 0 never predicted, class 1 always predicted
        let one_sided = ConfusionCounts::binary(4, 0, 6, 0);
        close(precision_macro(&one_sided), 0.4 / 2.0, 1e-15);
        close(recall_macro(&one_sided), 0.5, 1e-15);
    }

    #[test]
    fn three_class_by_hand() {
        // rows = truth, cols = predicted
        let c = ConfusionCounts::from_counts(vec![vec![5, 1, 0], vec![2, 3, 1], vec![0, 0, 4]]);
        // column sums 7, 4, 5; row sums 6, 6, 4
        let p = (5.0 / 7.0 + 3.0 / 4.0 + 4.0 / 5.0) / 3.0;
        let r = (5.0 / 6.0 + 3.0 / 6.0 + 4.0 / 4.0) / 3.0;
        close(precision_macro(&c), p, 1e-15);
        close(recall_macro(&c), r, 1e-15);
        let f = |p: f64, r: f64| 2.0 * p * r / (p + r);
        let f1 = (f(5.0 / 7.0, 5.0 / 6.0) + f(3.0 / 4.0, 3.0 / 6.0) + f(4.0 / 5.0, 1.0)) / 3.0;
        close(f1_macro(&c), f1, 1e-15);
        close(accuracy(&c), 12.0 / 16.0, 1e-15);
    }

    #[test]
    fn nll_examples() {
        assert_eq!(
            mean_nll(&preds(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1])),
            0.0
        );
        close(
            mean_nll(&preds(vec![vec![0.5, 0.5]], vec![1])),
            std::f64::consts::LN_2,
            1e-15,
        );
        close(
            mean_nll(&preds(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![0, 1])),
            0.164252,
            5e-7,
        );
        // clamp keeps a zero true-class probability finite
        close(
            mean_nll(&preds(vec![vec![1.0, 0.0]], vec![1])),
            -(1e-12f64).ln(),
            1e-9,
        );
    }

    #[test]
    fn bins_examples() {
        let b = reliability_bins(&preds(vec![vec![1.0, 0.0]], vec![0]), 10).unwrap();
        assert_eq!(
            b.bins()[9],
            Bin {
                count: 1,
                sum_confidence: 1.0,
                sum_correct: 1
            }
        );
        assert_eq!(ReliabilityBins::bin_index(0.8, 10), 8);
        assert_eq!(ReliabilityBins::bin_index(0.7999999999, 10), 7);
        assert_eq!(ReliabilityBins::bin_index(1.0, 10), 9);
        assert_eq!(ReliabilityBins::bin_index(0.0, 10), 0);
        assert_eq!(ReliabilityBins::bin_index(0.5, 1), 0);
        assert_eq!(
            reliability_bins(&preds(vec![vec![1.0, 0.0]], vec![0]), 0),
            Err(MetricsError::ZeroBins)
        );
    }

    #[test]
    fn bin_edges_agree_with_division() {
        for m in [1usize, 3, 5, 7, 10, 15, 100] {
            for i in 0..m {
                let e = ReliabilityBins::edge(i, m);
                assert_eq!(ReliabilityBins::bin_index(e, m), i, "edge {i}/{m}");
            }
        }
    }

    #[test]
    fn ece_examples() {
        let all_sure = preds(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]);
        assert_eq!(ece(&all_sure, 15).unwrap(), 0.0);
        close(
            ece(&preds(vec![vec![0.7, 0.3]], vec![0]), 10).unwrap(),
            0.3,
            1e-12,
        );
        let two = preds(vec![vec![0.82, 0.18], vec![0.12, 0.88]], vec![0, 0]);
        close(ece(&two, 10).unwrap(), 0.35, 1e-12);
    }

    #[test]
    fn rejects_invalid_predictions() {
        assert_eq!(
            ProbPredictions::new(vec![], vec![]),
            Err(MetricsError::Empty)
        );
        assert!(ProbPredictions::new(vec![vec![0.6, 0.6]], vec![0]).is_err());
        assert!(ProbPredictions::new(vec![vec![0.5, 0.5]], vec![2]).is_err());
        assert!(ProbPredictions::new(vec![vec![0.5, 0.5], vec![1.0]], vec![0, 0]).is_err());
        assert!(ProbPredictions::new(vec![vec![1.5, -0.5]], vec![0]).is_err());
    }

    #[test]
    fn report_is_consistent() {
        let p = preds(
            vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.6, 0.4]],
            vec![0, 1, 1],
        );
        let r = build_report(&p, 15, None).unwrap();
        r.validate().unwrap();
        assert_eq!(r.confusion.tp, Some(1));
        assert_eq!(r.confusion.fn_, Some(1));
        assert_eq!(r.confusion.tn, Some(1));
        assert_eq!(r.bin_stats.len(), 15);
    }
}
