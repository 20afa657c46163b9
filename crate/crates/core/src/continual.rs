//! Continual learning with experience replay.
//!
//! Labels of an episode arrive one at a time. Each arrival imprints a new
//! column, adds the label's sampled train rows to the replay buffer, relabels
//! the whole buffer against every visible label, retrains (warm start) and
//! evaluates on the episode's fixed test split restricted to visible labels.

use serde::{Deserialize, Serialize};

use crate::episode::{target_matrix, Episode};
use crate::error::{Error, Result};
use crate::imprint::{train, Head, ImprintClassifier, TrainConfig, TrainingSet};
use crate::matrix::Matrix;
use crate::metrics::{best_threshold, compute_all, EvalBatch, MetricsReport, Mode};
use crate::store::{EmbeddingDataset, EmbeddingRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinualConfig {
    pub train: TrainConfig,
    pub threshold: f64,
    pub grid: Vec<f64>,
    /// Re-imprint every visible column from the buffer before each retrain
    /// instead of keeping trained weights.
    pub reimprint: bool,
}

/// Past train rows kept for rehearsal. Nothing is ever evicted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayBuffer<'a> {
    pub records: Vec<&'a EmbeddingRecord>,
    pub visible_labels: Vec<usize>,
}

impl<'a> ReplayBuffer<'a> {
    fn add_label(&mut self, label: usize, records: impl IntoIterator<Item = &'a EmbeddingRecord>) {
        debug_assert!(!self.visible_labels.contains(&label));
        self.visible_labels.push(label);
        self.records.extend(records);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinualStep {
    /// 1-based.
    pub step: usize,
    pub n_visible: usize,
    pub buffer_size: usize,
    pub report: MetricsReport,
    pub fixed_threshold_f1: f64,
    pub best_threshold: f64,
    pub best_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinualTrace {
    pub episode: usize,
    pub visible_labels: Vec<usize>,
    pub steps: Vec<ContinualStep>,
}

/// Test scores of every record over the classifier's current columns.
pub(crate) fn score_matrix(
    clf: &ImprintClassifier,
    records: &[&EmbeddingRecord],
) -> Result<Matrix<f64>> {
    let k = clf.num_classes();
    let mut data = Vec::with_capacity(records.len() * k);
    for r in records {
        data.extend(clf.scores(&r.vector)?);
    }
    Matrix::new(records.len(), k, data)
}

pub fn run_continual(
    dataset: &EmbeddingDataset,
    episode: &Episode<'_>,
    cfg: &ContinualConfig,
) -> Result<ContinualTrace> {
    run_continual_with(dataset, episode, cfg, |_, _| {})
}

/// Like [`run_continual`], calling `inspect(buffer, test_truth)` after each step.
pub fn run_continual_with<'a>(
    dataset: &EmbeddingDataset,
    episode: &Episode<'a>,
    cfg: &ContinualConfig,
    mut inspect: impl FnMut(&ReplayBuffer<'a>, &Matrix<u8>),
) -> Result<ContinualTrace> {
    cfg.train.validate()?;
    let dim = dataset.dim();
    let mut clf = ImprintClassifier::empty(dim, Head::Sigmoid, cfg.threshold)?;
    let mut buffer = ReplayBuffer::default();
    let mut steps = Vec::with_capacity(episode.sampled_labels.len());

    for (j, &label) in episode.sampled_labels.iter().enumerate() {
        let name = dataset.label_name(label);
        let examples = episode.train_with_label(j);
        if examples.is_empty() {
            return Err(Error::EmptyClass(name.to_string()));
        }
        let vectors: Vec<&[f32]> = examples.iter().map(|r| r.vector.as_slice()).collect();
        clf.add_class(name, &vectors)?;

        let new_rows = episode
            .train
            .iter()
            .zip(&episode.train_origin)
            .filter(|(_, &o)| o == j)
            .map(|(r, _)| *r);
        buffer.add_label(label, new_rows);

        if cfg.reimprint {
            for (k, &l) in buffer.visible_labels.iter().enumerate() {
                let vs: Vec<&[f32]> = buffer
                    .records
                    .iter()
                    .filter(|r| r.has_label(l))
                    .map(|r| r.vector.as_slice())
                    .collect();
                if !vs.is_empty() {
                    clf.reimprint(k, &vs)?;
                }
            }
        }

        let set = TrainingSet::from_records(dim, &buffer.records, &buffer.visible_labels)?;
        train(&mut clf, &set, &cfg.train)?;

        let truth = target_matrix(&episode.test, &buffer.visible_labels);
        let scores = score_matrix(&clf, &episode.test)?;
        let (best_t, best_f1) = best_threshold(&truth, &scores, &cfg.grid)?;
        let batch = EvalBatch::thresholded(truth, scores, cfg.threshold)?;
        let report = compute_all(&batch, Mode::Multilabel)?;
        inspect(&buffer, batch.truth());

        steps.push(ContinualStep {
            step: j + 1,
            n_visible: buffer.visible_labels.len(),
            buffer_size: buffer.records.len(),
            fixed_threshold_f1: report.overall_f1.unwrap_or(0.0),
            report,
            best_threshold: best_t,
            best_f1,
        });
    }

    Ok(ContinualTrace {
        episode: episode.index,
        visible_labels: buffer.visible_labels,
        steps,
    })
}
