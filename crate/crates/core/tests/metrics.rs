mod common;

use common::{naive_confusion, naive_ece, random_predictions, reference_counts, rng};
use noisecal::metrics::{
    accuracy, confusion_matrix, ece, f1_macro, mean_nll, precision_macro, recall_macro,
    reliability_bins, ConfusionCounts, ProbPredictions, ReliabilityBins,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn reference_cell_metrics() {
    let c = reference_counts();
    close(accuracy(&c), 905.0 / 921.0, 1e-15);
    close(accuracy(&c), 0.98263, 5e-6);
    close(precision_macro(&c), 0.98177, 5e-6);
    close(recall_macro(&c), 0.98349, 5e-6);
    close(f1_macro(&c), 0.98251, 5e-6);
    for v in [
        accuracy(&c),
        precision_macro(&c),
        recall_macro(&c),
        f1_macro(&c),
    ] {
        assert!((v - 0.98).abs() <= 0.005);
    }
}

#[test]
fn binary_macro_metrics_match_per_class_formulas() {
    let (tp, fn_, fp, tn) = (490.0, 13.0, 3.0, 415.0);
    let p1 = tp / (tp + fp);
    let r1 = tp / (tp + fn_);
    let p0 = tn / (tn + fn_);
    let r0 = tn / (tn + fp);
    let f = |p: f64, r: f64| 2.0 * p * r / (p + r);
    let c = reference_counts();
    close(precision_macro(&c), (p0 + p1) / 2.0, 1e-15);
    close(recall_macro(&c), (r0 + r1) / 2.0, 1e-15);
    close(f1_macro(&c), (f(p0, r0) + f(p1, r1)) / 2.0, 1e-15);
}

#[test]
fn degenerate_counts() {
    let perfect = ConfusionCounts::binary(10, 0, 0, 7);
    for v in [
        accuracy(&perfect),
        precision_macro(&perfect),
        recall_macro(&perfect),
        f1_macro(&perfect),
    ] {
        assert_eq!(v, 1.0);
    }
    let wrong = ConfusionCounts::binary(0, 5, 5, 0);
    for v in [
        accuracy(&wrong),
        precision_macro(&wrong),
        recall_macro(&wrong),
        f1_macro(&wrong),
    ] {
        assert_eq!(v, 0.0);
    }
}

#[test]
fn three_class_counts_match_hand_enumeration() {
    let mut r = rng(3);
    for _ in 0..50 {
        let counts: Vec<Vec<u64>> = (0..3)
            .map(|_| (0..3).map(|_| r.random_range(0..20)).collect())
            .collect();
        let c = ConfusionCounts::from_counts(counts.clone());
        let col = |k: usize| (0..3).map(|t| counts[t][k]).sum::<u64>() as f64;
        let row = |k: usize| counts[k].iter().sum::<u64>() as f64;
        let ratio = |num: u64, den: f64| if den == 0.0 { 0.0 } else { num as f64 / den };
        let mut p = [0.0; 3];
        let mut rc = [0.0; 3];
        let mut f = [0.0; 3];
        for k in 0..3 {
            p[k] = ratio(counts[k][k], col(k));
            rc[k] = ratio(counts[k][k], row(k));
            f[k] = if p[k] + rc[k] == 0.0 {
                0.0
            } else {
                2.0 * p[k] * rc[k] / (p[k] + rc[k])
            };
        }
        close(precision_macro(&c), (p[0] + p[1] + p[2]) / 3.0, 1e-15);
        close(recall_macro(&c), (rc[0] + rc[1] + rc[2]) / 3.0, 1e-15);
        close(f1_macro(&c), (f[0] + f[1] + f[2]) / 3.0, 1e-15);
    }
}

#[test]
fn confusion_and_tie_examples() {
    let p = ProbPredictions::new(vec![vec![0.9, 0.1]], vec![0]).unwrap();
    assert_eq!(confusion_matrix(&p).counts(), &[vec![1, 0], vec![0, 0]]);
    let p = ProbPredictions::new(vec![vec![0.5, 0.5]], vec![1]).unwrap();
    assert_eq!(confusion_matrix(&p).get(1, 0), 1);
}

#[test]
fn confusion_matches_naive_loop_on_1000_rows() {
    let mut r = rng(11);
    let mut remaining = 1000;
    let mut total = 0;
    while remaining > 0 {
        let k = r.random_range(2..=5);
        let preds = random_predictions(&mut r, remaining.min(200), k);
        remaining -= preds.len();
        let c = confusion_matrix(&preds);
        assert_eq!(c.counts(), naive_confusion(&preds).as_slice());
        total += c.total();
    }
    assert_eq!(total, 1000);
}

#[test]
fn nll_examples() {
    let p = ProbPredictions::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]).unwrap();
    assert_eq!(mean_nll(&p), 0.0);
    let p = ProbPredictions::new(vec![vec![0.5, 0.5]], vec![1]).unwrap();
    close(mean_nll(&p), 2f64.ln(), 1e-15);
    let p = ProbPredictions::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![0, 1]).unwrap();
    close(mean_nll(&p), 0.164252, 5e-7);
    let p = ProbPredictions::new(vec![vec![1.0, 0.0]], vec![1]).unwrap();
    close(mean_nll(&p), -(1e-12f64).ln(), 1e-9);
}

#[test]
fn ece_examples() {
    let p = ProbPredictions::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]).unwrap();
    assert_eq!(ece(&p, 15).unwrap(), 0.0);
    let p = ProbPredictions::new(vec![vec![0.7, 0.3]], vec![0]).unwrap();
    close(ece(&p, 10).unwrap(), 0.3, 1e-15);
    let p = ProbPredictions::new(vec![vec![0.82, 0.18], vec![0.12, 0.88]], vec![0, 0]).unwrap();
    close(ece(&p, 10).unwrap(), 0.35, 1e-15);

    let p = ProbPredictions::new(vec![vec![1.0, 0.0]], vec![0]).unwrap();
    let bins = reliability_bins(&p, 10).unwrap();
    let last = bins.bins()[9];
    assert_eq!(
        (last.count, last.sum_confidence, last.sum_correct),
        (1, 1.0, 1)
    );
    assert_eq!(ReliabilityBins::bin_index(0.8, 10), 8);
    assert_eq!(ReliabilityBins::bin_index(0.7999999999999999, 10), 7);
    assert!(ece(&p, 0).is_err());
}

#[test]
fn ece_equals_naive_loop_exactly() {
    let mut r = rng(5);
    for i in 0..200 {
        let k = if i % 2 == 0 { 2 } else { r.random_range(3..=5) };
        let preds = random_predictions(&mut r, 500, k);
        for m in [1, 5, 10, 15, 100] {
            let fast = ece(&preds, m).unwrap();
            let slow = naive_ece(&preds, m);
            assert_eq!(
                fast.to_bits(),
                slow.to_bits(),
                "dataset {i} M={m}: {fast} vs {slow}"
            );
            let bins = reliability_bins(&preds, m).unwrap();
            assert_eq!(
                bins.bins().iter().map(|b| b.count).sum::<u64>(),
                preds.len() as u64
            );
        }
    }
}

#[test]
fn single_bin_ece_is_accuracy_gap() {
    let mut r = rng(6);
    for _ in 0..200 {
        let k = r.random_range(2..=5);
        let preds = random_predictions(&mut r, 300, k);
        let acc = accuracy(&confusion_matrix(&preds));
        let mean_conf = preds
            .rows()
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / preds.len() as f64;
        close(ece(&preds, 1).unwrap(), (acc - mean_conf).abs(), 1e-12);
    }
}

proptest! {
    #[test]
    fn metrics_are_bounded_and_order_free(seed in any::<u64>(), k in 2usize..6, m in 1usize..40) {
        let mut r = rng(seed);
        let preds = random_predictions(&mut r, 120, k);
        let c = confusion_matrix(&preds);
        let values = [accuracy(&c), precision_macro(&c), recall_macro(&c), f1_macro(&c), ece(&preds, m).unwrap()];
        for v in values {
            prop_assert!((0.0..=1.0).contains(&v), "{}", v);
        }
        prop_assert!(mean_nll(&preds) >= 0.0);

        let mut order: Vec<usize> = (0..preds.len()).collect();
        order.shuffle(&mut r);
        let shuffled = ProbPredictions::new(
            order.iter().map(|&i| preds.rows()[i].clone()).collect(),
            order.iter().map(|&i| preds.labels()[i]).collect(),
        )
        .unwrap();
        let cs = confusion_matrix(&shuffled);
        prop_assert_eq!(&cs, &c);
        let tol = 1e-12;
        prop_assert!((ece(&shuffled, m).unwrap() - values[4]).abs() <= tol);
        prop_assert!((mean_nll(&shuffled) - mean_nll(&preds)).abs() <= tol);
    }
}
