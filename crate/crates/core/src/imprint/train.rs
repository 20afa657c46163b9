//! Full-batch training of the imprinted layer.
//!
//! Sigmoid head: binary cross-entropy averaged over all `N × K` cells.
//! Softmax head: categorical cross-entropy averaged over rows, one true class
//! per row. Optimized with Adam; columns are projected back to unit norm after
//! every step unless `renormalize_each_step` is off.

use serde::{Deserialize, Serialize};

use super::{logistic, softmax, AdamState, Head, ImprintClassifier};
use crate::error::{Error, Result};
use crate::store::EmbeddingRecord;

/// Activations are clipped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before `ln`.
pub const BCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub renormalize_each_step: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            renormalize_each_step: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("adam {name} {b} outside (0, 1)"));
            }
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return bad(format!(
                "adam epsilon {} must be positive",
                self.adam_epsilon
            ));
        }
        Ok(())
    }
}

/// Dense training rows: inputs `N × D` and 0/1 targets `N × K`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    classes: usize,
    inputs: Vec<f64>,
    targets: Vec<u8>,
}

impl TrainingSet {
    pub fn new(dim: usize, classes: usize, inputs: Vec<f64>, targets: Vec<u8>) -> Result<Self> {
        if dim == 0 || !inputs.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs for dim {dim}",
                inputs.len()
            )));
        }
        let n = inputs.len() / dim;
        if targets.len() != n * classes {
            return Err(Error::ShapeMismatch(format!(
                "{} targets for {n} rows × {classes} classes",
                targets.len()
            )));
        }
        if targets.iter().any(|&t| t > 1) {
            return Err(Error::ShapeMismatch("targets must be 0/1".into()));
        }
        Ok(Self {
            dim,
            classes,
            inputs,
            targets,
        })
    }

    /// Target `(r, k)` is 1 iff record `r` carries `class_labels[k]`; other labels are ignored.
    pub fn from_records(
        dim: usize,
        records: &[&EmbeddingRecord],
        class_labels: &[usize],
    ) -> Result<Self> {
        let mut inputs = Vec::with_capacity(records.len() * dim);
        let mut targets = Vec::with_capacity(records.len() * class_labels.len());
        for r in records {
            if r.vector.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: r.vector.len(),
                });
            }
            inputs.extend(r.vector.iter().map(|&x| x as f64));
            targets.extend(class_labels.iter().map(|&l| r.has_label(l) as u8));
        }
        Self::new(dim, class_labels.len(), inputs, targets)
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input(&self, r: usize) -> &[f64] {
        &self.inputs[r * self.dim..(r + 1) * self.dim]
    }

    pub fn target(&self, r: usize) -> &[u8] {
        &self.targets[r * self.classes..(r + 1) * self.classes]
    }
}

fn clamp(p: f64) -> f64 {
    p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

/// Mean loss and its gradient with respect to the raw column-major weights.
pub fn loss_and_gradient(
    weights: &[f64],
    set: &TrainingSet,
    head: Head,
) -> Result<(f64, Vec<f64>)> {
    let (dim, k) = (set.dim, set.classes);
    if weights.len() != dim * k {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for dim {dim} × {k} classes",
            weights.len()
        )));
    }
    let n = set.len();
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let mut logits = vec![0.0; k];
    for r in 0..n {
        let x = set.input(r);
        let y = set.target(r);
        for (c, z) in logits.iter_mut().enumerate() {
            *z = weights[c * dim..(c + 1) * dim]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum();
        }
        // Per-logit residual dL/dz before averaging.
        let residual: Vec<f64> = match head {
            Head::Sigmoid => logits
                .iter()
                .zip(y)
                .map(|(&z, &t)| {
                    let p = logistic(z);
                    let t = t as f64;
                    loss -= t * clamp(p).ln() + (1.0 - t) * clamp(1.0 - p).ln();
                    p - t
                })
                .collect(),
            Head::Softmax => {
                let count = y.iter().filter(|&&t| t == 1).count();
                if count != 1 {
                    return Err(Error::NotSingleLabel { row: r, count });
                }
                let s = softmax(&logits);
                let truth = y.iter().position(|&t| t == 1).unwrap_or(0);
                loss -= clamp(s[truth]).ln();
                s.iter().zip(y).map(|(&p, &t)| p - t as f64).collect()
            }
        };
        for (c, res) in residual.iter().enumerate() {
            for (g, v) in grad[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                *g += res * v;
            }
        }
    }
    let denom = match head {
        Head::Sigmoid => (n * k) as f64,
        Head::Softmax => n as f64,
    };
    grad.iter_mut().for_each(|g| *g /= denom);
    Ok((loss / denom, grad))
}

/// Trains `clf` in place for `cfg.epochs` full-batch Adam steps; returns the
/// loss before each step.
pub fn train(
    clf: &mut ImprintClassifier,
    set: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if set.dim != clf.dim() {
        return Err(Error::DimMismatch {
            expected: clf.dim(),
            found: set.dim,
        });
    }
    if set.classes != clf.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} target classes for a {}-class classifier",
            set.classes,
            clf.num_classes()
        )));
    }
    if clf.head() == Head::Softmax {
        for r in 0..set.len() {
            let count = set.target(r).iter().filter(|&&t| t == 1).count();
            if count != 1 {
                return Err(Error::NotSingleLabel { row: r, count });
            }
        }
    }

    let mut adam = AdamState::new(
        clf.weights().len(),
        cfg.learning_rate,
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_epsilon,
    );
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, grad) = loss_and_gradient(clf.weights(), set, clf.head())?;
        trace.push(loss);
        adam.update(clf.weights_mut(), &grad);
        if cfg.renormalize_each_step {
            clf.renormalize_columns();
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::normalize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&v).unwrap()
    }

    fn random_problem(seed: u64, dim: usize, k: usize, n: usize) -> (Vec<f64>, TrainingSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<f64> = (0..k).flat_map(|_| random_unit(&mut rng, dim)).collect();
        let inputs: Vec<f64> = (0..n).flat_map(|_| random_unit(&mut rng, dim)).collect();
        let targets: Vec<u8> = (0..n * k).map(|_| rng.random_range(0..2u8)).collect();
        (weights, TrainingSet::new(dim, k, inputs, targets).unwrap())
    }

    fn central_difference(weights: &[f64], set: &TrainingSet, head: Head, h: f64) -> Vec<f64> {
        (0..weights.len())
            .map(|i| {
                let mut plus = weights.to_vec();
                let mut minus = weights.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let lp = loss_and_gradient(&plus, set, head).unwrap().0;
                let lm = loss_and_gradient(&minus, set, head).unwrap().0;
                (lp - lm) / (2.0 * h)
            })
            .collect()
    }

    fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = a
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        diff / scale.max(1e-300)
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let (w, set) = random_problem(3, 8, 3, 10);
        let (_, grad) = loss_and_gradient(&w, &set, Head::Sigmoid).unwrap();
        let fd = central_difference(&w, &set, Head::Sigmoid, 1e-5);
        assert!(relative_error(&grad, &fd) < 1e-4);
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (dim, k, n) = (8, 3, 9);
        let weights: Vec<f64> = (0..k).flat_map(|_| random_unit(&mut rng, dim)).collect();
        let inputs: Vec<f64> = (0..n).flat_map(|_| random_unit(&mut rng, dim)).collect();
        let mut targets = vec![0u8; n * k];
        for r in 0..n {
            targets[r * k + r % k] = 1;
        }
        let set = TrainingSet::new(dim, k, inputs, targets).unwrap();
        let (_, grad) = loss_and_gradient(&weights, &set, Head::Softmax).unwrap();
        let fd = central_difference(&weights, &set, Head::Softmax, 1e-5);
        assert!(relative_error(&grad, &fd) < 1e-4);
    }

    #[test]
    fn bce_loss_value_by_hand() {
        // One row, one class, zero logit: loss = ln 2 for either target.
        let set = TrainingSet::new(2, 1, vec![1.0, 0.0], vec![1]).unwrap();
        let (loss, grad) = loss_and_gradient(&[0.0, 1.0], &set, Head::Sigmoid).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(grad, vec![-0.5, 0.0]);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let mut clf = ImprintClassifier::imprint(
            2,
            Head::Sigmoid,
            0.5,
            vec![("a", vec![&[0.6f32, 0.8][..]])],
        )
        .unwrap();
        let before = clf.clone();
        let set = TrainingSet::new(2, 1, vec![1.0, 0.0], vec![1]).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(&mut clf, &set, &cfg).unwrap().is_empty());
        assert_eq!(clf, before);
    }

    #[test]
    fn single_adam_step_follows_negative_gradient_sign() {
        let mut clf = ImprintClassifier::imprint(
            3,
            Head::Sigmoid,
            0.5,
            vec![("a", vec![&[0.6f32, 0.0, 0.8][..]])],
        )
        .unwrap();
        let before = clf.weights().to_vec();
        let set = TrainingSet::new(3, 1, vec![0.0, 1.0, 0.0], vec![1]).unwrap();
        let (_, grad) = loss_and_gradient(clf.weights(), &set, Head::Sigmoid).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            renormalize_each_step: false,
            ..TrainConfig::default()
        };
        train(&mut clf, &set, &cfg).unwrap();
        for i in 0..3 {
            let delta = clf.weights()[i] - before[i];
            if grad[i] == 0.0 {
                assert_eq!(delta, 0.0);
            } else {
                assert_eq!(delta.signum(), -grad[i].signum());
                assert!((delta.abs() - 1e-3).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn columns_stay_unit_norm_and_loss_drops() {
        let (_, set) = random_problem(5, 8, 3, 12);
        let seeds: Vec<[f32; 8]> = (0..3)
            .map(|k| [1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, k as f32])
            .collect();
        let mut clf = ImprintClassifier::imprint(
            8,
            Head::Sigmoid,
            0.5,
            seeds
                .iter()
                .enumerate()
                .map(|(k, s)| (format!("c{k}"), vec![&s[..]]))
                .collect(),
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let trace = train(&mut clf, &set, &cfg).unwrap();
        assert_eq!(trace.len(), 30);
        assert!(trace[29] < trace[0]);
        for k in 0..3 {
            let n: f64 = clf.column(k).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn training_errors() {
        let mut clf = ImprintClassifier::imprint(
            2,
            Head::Softmax,
            0.5,
            vec![
                ("a", vec![&[1.0f32, 0.0][..]]),
                ("b", vec![&[0.0f32, 1.0][..]]),
            ],
        )
        .unwrap();
        let empty = TrainingSet::new(2, 2, vec![], vec![]).unwrap();
        assert!(matches!(
            train(&mut clf, &empty, &TrainConfig::default()),
            Err(Error::EmptyTrainingSet)
        ));
        let multi = TrainingSet::new(2, 2, vec![1.0, 0.0], vec![1, 1]).unwrap();
        assert!(matches!(
            train(&mut clf, &multi, &TrainConfig::default()),
            Err(Error::NotSingleLabel { row: 0, count: 2 })
        ));
        let bad = TrainConfig {
            adam_beta1: 1.0,
            ..TrainConfig::default()
        };
        let ok = TrainingSet::new(2, 2, vec![1.0, 0.0], vec![1, 0]).unwrap();
        assert!(matches!(
            train(&mut clf, &ok, &bad),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn targets_restricted_to_class_labels() {
        let r = EmbeddingRecord::new(0, 0, vec![1.0, 0.0], vec![0, 25]);
        let set = TrainingSet::from_records(2, &[&r], &[0, 1, 2]).unwrap();
        assert_eq!(set.target(0), &[1, 0, 0]);
    }
}
