//! The JSON batch read by `mwi metrics`.

use mwi::metrics::{compute_all, EvalBatch, MetricsReport, Mode};
use mwi::{Error, Matrix};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Decision {
    #[default]
    Threshold,
    Argmax,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Batch {
    truth: Vec<Vec<u8>>,
    scores: Vec<Vec<f64>>,
    /// Explicit 0/1 predictions; otherwise derived from `decision`.
    #[serde(default)]
    predictions: Option<Vec<Vec<u8>>>,
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default)]
    decision: Decision,
    /// Defaults to single-label when every truth row has exactly one label.
    #[serde(default)]
    mode: Option<Mode>,
}

fn default_threshold() -> f64 {
    0.5
}

fn matrix<T: Copy>(what: &str, rows: &[Vec<T>]) -> Result<Matrix<T>, Error> {
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_rows(cols, rows).map_err(|e| Error::InvalidDataset(format!("{what}: {e}")))
}

pub fn evaluate(json: &str) -> Result<MetricsReport, Error> {
    let batch: Batch = serde_json::from_str(json)?;
    let truth = matrix("truth", &batch.truth)?;
    let scores = matrix("scores", &batch.scores)?;
    let mode = batch.mode.unwrap_or_else(|| {
        let single = batch
            .truth
            .iter()
            .all(|r| r.iter().filter(|&&b| b == 1).count() == 1);
        if single {
            Mode::SingleLabel
        } else {
            Mode::Multilabel
        }
    });
    let eval = match (batch.predictions, batch.decision) {
        (Some(p), _) => EvalBatch::new(truth, scores, matrix("predictions", &p)?)?,
        (None, Decision::Threshold) => EvalBatch::thresholded(truth, scores, batch.threshold)?,
        (None, Decision::Argmax) => EvalBatch::argmax(truth, scores)?,
    };
    compute_all(&eval, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_by_default() {
        let r = evaluate(r#"{"truth": [[1,0],[0,1]], "scores": [[0.9,0.6],[0.2,0.7]]}"#).unwrap();
        assert_eq!(r.overall_precision, Some(2.0 / 3.0));
        assert_eq!(r.overall_recall, Some(1.0));
        assert_eq!(r.top1_accuracy, Some(1.0));
    }

    #[test]
    fn argmax_and_explicit_mode() {
        let r = evaluate(
            r#"{"truth": [[1,0],[0,1]], "scores": [[0.9,0.6],[0.2,0.7]], "decision": "argmax", "mode": "multilabel"}"#,
        )
        .unwrap();
        assert_eq!(r.subset_accuracy, Some(1.0));
        assert_eq!(r.top1_accuracy, None);
    }

    #[test]
    fn ragged_rows_are_data_errors() {
        let err =
            evaluate(r#"{"truth": [[1,0],[1]], "scores": [[0.9,0.6],[0.2,0.7]]}"#).unwrap_err();
        assert!(!err.is_config_error());
    }
}
