//! Multilabel weight imprinting classifier.
//!
//! A single bias-free dense layer whose column `k` is a unit-norm template for
//! class `k`. Because inputs are unit-norm too, every logit is a cosine
//! similarity in `[-1, 1]`. The sigmoid head scores each class independently
//! and predicts every class at or above the threshold, which may be none. The
//! softmax head reproduces classic single-label imprinting.

mod adam;
mod format;
mod train;

pub use adam::AdamState;
pub use format::{
    load_classifier, read_classifier, save_classifier, write_classifier, MWIC_MAGIC, MWIC_VERSION,
};
pub use train::{loss_and_gradient, train, TrainConfig, TrainingSet, BCE_CLAMP};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Sigmoid,
    Softmax,
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Sigmoid => "sigmoid",
            Head::Softmax => "softmax",
        })
    }
}

impl FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Head::Sigmoid),
            "softmax" => Ok(Head::Softmax),
            other => Err(Error::InvalidConfig(format!("unknown head {other:?}"))),
        }
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Normalized mean of `vectors`, the imprinted template for one class.
pub fn imprint_column(name: &str, dim: usize, vectors: &[&[f32]]) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        return Err(Error::EmptyClass(name.to_string()));
    }
    let mut mean = vec![0.0f64; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        for (m, &x) in mean.iter_mut().zip(v.iter()) {
            *m += x as f64;
        }
    }
    let n = vectors.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    normalize(&mean).map_err(|_| Error::DegenerateClass(name.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprintClassifier {
    dim: usize,
    class_names: Vec<String>,
    /// Column-major `dim × K`.
    weights: Vec<f64>,
    head: Head,
    threshold: f64,
}

impl ImprintClassifier {
    /// An empty classifier with no classes yet.
    pub fn empty(dim: usize, head: Head, threshold: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        validate_threshold(threshold)?;
        Ok(Self {
            dim,
            class_names: Vec::new(),
            weights: Vec::new(),
            head,
            threshold,
        })
    }

    /// Imprints one column per class from that class's example embeddings.
    pub fn imprint<S: Into<String>>(
        dim: usize,
        head: Head,
        threshold: f64,
        classes: Vec<(S, Vec<&[f32]>)>,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidConfig(
                "imprinting requires at least one class".into(),
            ));
        }
        let mut clf = Self::empty(dim, head, threshold)?;
        for (name, vectors) in classes {
            clf.add_class(name, &vectors)?;
        }
        Ok(clf)
    }

    /// Appends an imprinted column for a new class. Existing columns are untouched.
    pub fn add_class(&mut self, name: impl Into<String>, vectors: &[&[f32]]) -> Result<()> {
        let name = name.into();
        if self.class_names.contains(&name) {
            return Err(Error::DuplicateClass(name));
        }
        let column = imprint_column(&name, self.dim, vectors)?;
        self.weights.extend_from_slice(&column);
        self.class_names.push(name);
        Ok(())
    }

    /// Replaces column `k` with a fresh imprint of `vectors`.
    pub fn reimprint(&mut self, k: usize, vectors: &[&[f32]]) -> Result<()> {
        let column = imprint_column(&self.class_names[k], self.dim, vectors)?;
        self.weights[k * self.dim..(k + 1) * self.dim].copy_from_slice(&column);
        Ok(())
    }

    pub(crate) fn from_parts(
        dim: usize,
        class_names: Vec<String>,
        weights: Vec<f64>,
        head: Head,
        threshold: f64,
    ) -> Result<Self> {
        validate_threshold(threshold)?;
        if weights.len() != dim * class_names.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for dim {dim} × {} classes",
                weights.len(),
                class_names.len()
            )));
        }
        Ok(Self {
            dim,
            class_names,
            weights,
            head,
            threshold,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn set_head(&mut self, head: Head) {
        self.head = head;
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        validate_threshold(threshold)?;
        self.threshold = threshold;
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    pub fn renormalize_columns(&mut self) {
        for col in self.weights.chunks_exact_mut(self.dim) {
            let n = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                col.iter_mut().for_each(|x| *x /= n);
            }
        }
    }

    /// Raw inner products `w_kᵀ x`.
    pub fn logits(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .map(|col| col.iter().zip(x).map(|(w, &v)| w * v as f64).sum())
            .collect())
    }

    /// Per-class activations in `[0, 1]`.
    pub fn scores(&self, x: &[f32]) -> Result<Vec<f64>> {
        let z = self.logits(x)?;
        Ok(match self.head {
            Head::Sigmoid => z.into_iter().map(logistic).collect(),
            Head::Softmax => softmax(&z),
        })
    }

    /// Applies the decision rule to precomputed scores.
    pub fn decide(&self, scores: &[f64]) -> Vec<usize> {
        match self.head {
            Head::Sigmoid => scores
                .iter()
                .enumerate()
                .filter(|(_, &s)| s >= self.threshold)
                .map(|(i, _)| i)
                .collect(),
            Head::Softmax => argmax(scores).into_iter().collect(),
        }
    }

    pub fn predict(&self, x: &[f32]) -> Result<Vec<usize>> {
        Ok(self.decide(&self.scores(x)?))
    }
}

fn validate_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "threshold {threshold} outside (0, 1)"
        )))
    }
}
