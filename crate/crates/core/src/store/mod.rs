//! Embedding datasets: records, validation, normalization and the `.mwie`
//! on-disk container.
//!
//! Vectors are stored as `f32` and every computation widens them to `f64`.
//! Normalization happens once, at ingestion; downstream code assumes unit
//! norm.

mod format;
mod synthetic;

pub use format::{
    load_dataset, read_dataset, save_dataset, write_dataset, MWIE_MAGIC, MWIE_VERSION,
};
pub use synthetic::{generate_synthetic, synthetic_prototypes, SyntheticSpec};

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance for the unit-norm contract on stored vectors.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

/// One embedding with its ground-truth label set.
///
/// `group_id` is shared by all augmented copies of one source example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingRecord {
    pub record_id: u64,
    pub group_id: u64,
    pub vector: Vec<f32>,
    /// Sorted, deduplicated indices into the dataset vocabulary. May be empty.
    pub labels: Vec<u32>,
}

impl EmbeddingRecord {
    pub fn new(record_id: u64, group_id: u64, vector: Vec<f32>, mut labels: Vec<u32>) -> Self {
        labels.sort_unstable();
        labels.dedup();
        Self {
            record_id,
            group_id,
            vector,
            labels,
        }
    }

    pub fn has_label(&self, label: usize) -> bool {
        self.labels.binary_search(&(label as u32)).is_ok()
    }

    pub fn vector_f64(&self) -> Vec<f64> {
        self.vector.iter().map(|&x| x as f64).collect()
    }
}

/// A validated, immutable collection of embedding records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingDataset {
    dim: usize,
    label_vocab: Vec<String>,
    records: Vec<EmbeddingRecord>,
}

impl EmbeddingDataset {
    /// Builds a dataset, checking every structural invariant.
    pub fn new(
        dim: usize,
        label_vocab: Vec<String>,
        records: Vec<EmbeddingRecord>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDataset("dimension must be positive".into()));
        }
        let mut ids = HashSet::with_capacity(records.len());
        let mut group_labels: BTreeMap<u64, &[u32]> = BTreeMap::new();
        for r in &records {
            if r.vector.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: r.vector.len(),
                });
            }
            if !ids.insert(r.record_id) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate record id {}",
                    r.record_id
                )));
            }
            if !r.labels.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidDataset(format!(
                    "record {}: labels not sorted and unique",
                    r.record_id
                )));
            }
            if let Some(&label) = r.labels.iter().find(|&&l| l as usize >= label_vocab.len()) {
                return Err(Error::LabelOutOfRange {
                    record_id: r.record_id,
                    label,
                    label_count: label_vocab.len(),
                });
            }
            match group_labels.get(&r.group_id) {
                Some(&labels) if labels != r.labels.as_slice() => {
                    return Err(Error::InvalidDataset(format!(
                        "group {} has records with different label sets",
                        r.group_id
                    )));
                }
                Some(_) => {}
                None => {
                    group_labels.insert(r.group_id, &r.labels);
                }
            }
        }
        Ok(Self {
            dim,
            label_vocab,
            records,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_vocab(&self) -> &[String] {
        &self.label_vocab
    }

    pub fn num_labels(&self) -> usize {
        self.label_vocab.len()
    }

    pub fn label_name(&self, label: usize) -> &str {
        &self.label_vocab[label]
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    /// True when every record carries exactly one label.
    pub fn is_single_label(&self) -> bool {
        self.records.iter().all(|r| r.labels.len() == 1)
    }

    /// Record indices per group, groups ordered by id and members by record id.
    pub fn groups(&self) -> BTreeMap<u64, Vec<usize>> {
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            groups.entry(r.group_id).or_default().push(i);
        }
        for members in groups.values_mut() {
            members.sort_by_key(|&i| self.records[i].record_id);
        }
        groups
    }

    /// Checks the unit-norm contract; returns one message per offending record.
    pub fn norm_violations(&self, tolerance: f64) -> Vec<String> {
        self.records
            .iter()
            .filter_map(|r| {
                let n = l2_norm_f32(&r.vector);
                ((n - 1.0).abs() > tolerance).then(|| {
                    format!(
                        "record {}: norm {n:.9} outside 1 ± {tolerance:e}",
                        r.record_id
                    )
                })
            })
            .collect()
    }

    /// Pretty JSON debug dump. Not an ingestion format.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn l2_norm_f32(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

/// Scales `v` to unit L2 norm.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = l2_norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateInput);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Normalizes an `f32` vector in `f64` arithmetic.
pub fn normalize_f32(v: &[f32]) -> Result<Vec<f32>> {
    let wide: Vec<f64> = v.iter().map(|&x| x as f64).collect();
    Ok(normalize(&wide)?.into_iter().map(|x| x as f32).collect())
}
