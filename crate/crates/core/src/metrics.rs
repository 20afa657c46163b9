//! Single-label and multilabel evaluation metrics.
//!
//! Conventions:
//! - "overall" metrics are micro averages pooled over every (row, class) cell;
//!   "class" metrics are macro averages of per-class values.
//! - Any ratio whose denominator is zero counts as 0, except Jaccard of two
//!   empty sets, which is 1.
//! - Average precision ranks rows by descending score, ties by row index, and
//!   averages precision@rank over the positive ranks. Classes without
//!   positives are left out of the mean.
//! - Top-k accuracy only applies to single-label truth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SingleLabel,
    Multilabel,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SingleLabel => "single-label",
            Mode::Multilabel => "multilabel",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-label" | "single" => Ok(Mode::SingleLabel),
            "multilabel" | "multi-label" | "multi" => Ok(Mode::Multilabel),
            other => Err(Error::InvalidConfig(format!(
                "unknown metric mode {other:?}"
            ))),
        }
    }
}

/// Truth, raw scores and binary predictions for `N` rows over `K` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBatch {
    truth: Matrix<u8>,
    scores: Matrix<f64>,
    predictions: Matrix<u8>,
}

impl EvalBatch {
    pub fn new(truth: Matrix<u8>, scores: Matrix<f64>, predictions: Matrix<u8>) -> Result<Self> {
        if truth.shape() != scores.shape() || truth.shape() != predictions.shape() {
            return Err(Error::ShapeMismatch(format!(
                "truth {:?}, scores {:?}, predictions {:?}",
                truth.shape(),
                scores.shape(),
                predictions.shape()
            )));
        }
        if truth
            .as_slice()
            .iter()
            .chain(predictions.as_slice())
            .any(|&b| b > 1)
        {
            return Err(Error::ShapeMismatch(
                "truth and predictions must be 0/1".into(),
            ));
        }
        Ok(Self {
            truth,
            scores,
            predictions,
        })
    }

    /// Predictions are the cells scoring at or above `threshold`.
    pub fn thresholded(truth: Matrix<u8>, scores: Matrix<f64>, threshold: f64) -> Result<Self> {
        let predictions = scores.map(|s| (s >= threshold) as u8);
        Self::new(truth, scores, predictions)
    }

    /// Predictions are the per-row argmax (lowest index on ties).
    pub fn argmax(truth: Matrix<u8>, scores: Matrix<f64>) -> Result<Self> {
        let mut predictions = Matrix::filled(scores.rows(), scores.cols(), 0u8);
        for r in 0..scores.rows() {
            if let Some(k) = crate::imprint::argmax(scores.row(r)) {
                predictions.set(r, k, 1);
            }
        }
        Self::new(truth, scores, predictions)
    }

    pub fn truth(&self) -> &Matrix<u8> {
        &self.truth
    }

    pub fn scores(&self) -> &Matrix<f64> {
        &self.scores
    }

    pub fn predictions(&self) -> &Matrix<u8> {
        &self.predictions
    }
}

pub const METRIC_NAMES: [&str; 13] = [
    "hamming_score",
    "jaccard",
    "subset_accuracy",
    "mean_average_precision",
    "class_f1",
    "overall_f1",
    "class_precision",
    "overall_precision",
    "class_recall",
    "overall_recall",
    "top1_accuracy",
    "top5_accuracy",
    "class_accuracy",
];

/// The thirteen metrics; `None` marks a metric that does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hamming_score: Option<f64>,
    pub jaccard: Option<f64>,
    pub subset_accuracy: Option<f64>,
    pub mean_average_precision: Option<f64>,
    pub class_f1: Option<f64>,
    pub overall_f1: Option<f64>,
    pub class_precision: Option<f64>,
    pub overall_precision: Option<f64>,
    pub class_recall: Option<f64>,
    pub overall_recall: Option<f64>,
    pub top1_accuracy: Option<f64>,
    pub top5_accuracy: Option<f64>,
    pub class_accuracy: Option<f64>,
}

impl MetricsReport {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 13] {
        [
            self.hamming_score,
            self.jaccard,
            self.subset_accuracy,
            self.mean_average_precision,
            self.class_f1,
            self.overall_f1,
            self.class_precision,
            self.overall_precision,
            self.class_recall,
            self.overall_recall,
            self.top1_accuracy,
            self.top5_accuracy,
            self.class_accuracy,
        ]
    }

    pub fn from_values(v: [Option<f64>; 13]) -> Self {
        Self {
            hamming_score: v[0],
            jaccard: v[1],
            subset_accuracy: v[2],
            mean_average_precision: v[3],
            class_f1: v[4],
            overall_f1: v[5],
            class_precision: v[6],
            overall_precision: v[7],
            class_recall: v[8],
            overall_recall: v[9],
            top1_accuracy: v[10],
            top5_accuracy: v[11],
            class_accuracy: v[12],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = METRIC_NAMES.iter().position(|&n| n == name)?;
        self.values()[i]
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn add(&mut self, truth: u8, pred: u8) {
        match (truth, pred) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (1, 0) => self.fn_ += 1,
            _ => {}
        }
    }

    fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fills `order` with row indices sorted by descending score, ties by ascending index.
fn rank_rows(scores: &Matrix<f64>, class: usize, order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..scores.rows());
    order.sort_unstable_by(|&a, &b| {
        scores
            .get(b, class)
            .total_cmp(&scores.get(a, class))
            .then(a.cmp(&b))
    });
}

fn average_precision_with(
    truth: &Matrix<u8>,
    scores: &Matrix<f64>,
    class: usize,
    order: &mut Vec<usize>,
) -> Option<f64> {
    let positives = (0..truth.rows())
        .filter(|&r| truth.get(r, class) == 1)
        .count();
    if positives == 0 {
        return None;
    }
    rank_rows(scores, class, order);
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in order.iter().enumerate() {
        if truth.get(r, class) == 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Average precision of one class column; `None` without positives.
pub fn average_precision(truth: &Matrix<u8>, scores: &Matrix<f64>, class: usize) -> Option<f64> {
    average_precision_with(truth, scores, class, &mut Vec::new())
}

/// Whether class `target` is among the `k` best scores of a row, ties going
/// to the lower class index.
fn in_top_k(scores: &[f64], target: usize, k: usize) -> bool {
    let s = scores[target];
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(j, &x)| x > s || (x == s && j < target))
        .count();
    ahead < k
}

pub fn compute_all(batch: &EvalBatch, mode: Mode) -> Result<MetricsReport> {
    let (n, k) = batch.truth.shape();
    if n == 0 || k == 0 {
        return Err(Error::ShapeMismatch(format!("empty batch {n}×{k}")));
    }
    let truth = &batch.truth;
    let pred = &batch.predictions;
    if mode == Mode::SingleLabel {
        for r in 0..n {
            let count = truth.row(r).iter().filter(|&&t| t == 1).count();
            if count != 1 {
                return Err(Error::NotSingleLabel { row: r, count });
            }
        }
    }

    // Per class: confusion counts and the number of rows where truth and prediction agree.
    let mut per_class = vec![(Counts::default(), 0usize); k];
    let mut jaccard_sum = 0.0;
    let mut exact_rows = 0usize;
    for (t, p) in truth
        .as_slice()
        .chunks_exact(k)
        .zip(pred.as_slice().chunks_exact(k))
    {
        let mut inter = 0usize;
        let mut union = 0usize;
        for ((&tc, &pc), class) in t.iter().zip(p).zip(per_class.iter_mut()) {
            class.0.add(tc, pc);
            class.1 += (tc == pc) as usize;
            inter += (tc & pc) as usize;
            union += (tc | pc) as usize;
        }
        jaccard_sum += if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
        exact_rows += (t == p) as usize;
    }
    let micro = per_class
        .iter()
        .fold(Counts::default(), |acc, (c, _)| Counts {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
        });
    let correct_cells: usize = per_class.iter().map(|(_, c)| c).sum();

    let macro_mean =
        |f: fn(&Counts) -> f64| per_class.iter().map(|(c, _)| f(c)).sum::<f64>() / k as f64;

    let mut order = Vec::with_capacity(n);
    let (ap_sum, ap_count) = (0..k)
        .filter(|&c| per_class[c].0.tp + per_class[c].0.fn_ > 0)
        .filter_map(|c| average_precision_with(truth, &batch.scores, c, &mut order))
        .fold((0.0, 0usize), |(s, n), ap| (s + ap, n + 1));
    let map = (ap_count > 0).then(|| ap_sum / ap_count as f64);

    let (top1, top5) = match mode {
        Mode::Multilabel => (None, None),
        Mode::SingleLabel => {
            let mut hit1 = 0usize;
            let mut hit5 = 0usize;
            for r in 0..n {
                let s = batch.scores.row(r);
                let t = truth
                    .row(r)
                    .iter()
                    .position(|&b| b == 1)
                    .unwrap_or_default();
                hit1 += in_top_k(s, t, 1) as usize;
                hit5 += in_top_k(s, t, 5) as usize;
            }
            (Some(ratio(hit1, n)), Some(ratio(hit5, n)))
        }
    };

    Ok(MetricsReport {
        hamming_score: Some(ratio(correct_cells, n * k)),
        jaccard: Some(jaccard_sum / n as f64),
        subset_accuracy: Some(ratio(exact_rows, n)),
        mean_average_precision: map,
        class_f1: Some(macro_mean(Counts::f1)),
        overall_f1: Some(micro.f1()),
        class_precision: Some(macro_mean(Counts::precision)),
        overall_precision: Some(micro.precision()),
        class_recall: Some(macro_mean(Counts::recall)),
        overall_recall: Some(micro.recall()),
        top1_accuracy: top1,
        top5_accuracy: top5,
        class_accuracy: Some(per_class.iter().map(|&(_, c)| ratio(c, n)).sum::<f64>() / k as f64),
    })
}

/// Micro F1 of thresholding `scores` at `threshold`.
pub fn overall_f1_at(truth: &Matrix<u8>, scores: &Matrix<f64>, threshold: f64) -> f64 {
    let mut counts = Counts::default();
    for (&t, &s) in truth.as_slice().iter().zip(scores.as_slice()) {
        counts.add(t, (s >= threshold) as u8);
    }
    counts.f1()
}

/// The grid threshold maximizing overall F1, lowest threshold on ties.
pub fn best_threshold(
    truth: &Matrix<u8>,
    scores: &Matrix<f64>,
    grid: &[f64],
) -> Result<(f64, f64)> {
    if truth.shape() != scores.shape() {
        return Err(Error::ShapeMismatch(format!(
            "truth {:?} vs scores {:?}",
            truth.shape(),
            scores.shape()
        )));
    }
    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        let f1 = overall_f1_at(truth, scores, t);
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((t, f1));
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("threshold grid is empty".into()))
}

/// Thresholds `step, 2·step, …` strictly below 1.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "grid step {step} outside (0, 1)"
        )));
    }
    // Divide by an integer count when possible so 0.07 is exactly 7/100.
    let inv = (1.0 / step).round();
    let exact = (inv * step - 1.0).abs() < 1e-9;
    let mut grid = Vec::new();
    let mut i = 1u64;
    loop {
        let t = if exact {
            i as f64 / inv
        } else {
            i as f64 * step
        };
        if t >= 1.0 - 1e-12 {
            break;
        }
        grid.push(t);
        i += 1;
    }
    Ok(grid)
}

/// 0.01, 0.02, …, 0.99.
pub fn default_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}
