//! Synthetic embedding datasets built by prototype superposition.
//!
//! Each label owns a random unit prototype. A record with label set `S` is
//! `normalize(Σ_{l∈S} prototype_l + σ·noise)`, which gives linearly
//! separable, label-correlated geometry.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{normalize, EmbeddingDataset, EmbeddingRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub num_labels: usize,
    /// Number of source examples generated with each label forced in.
    pub examples_per_label: usize,
    pub noise_sigma: f64,
    pub max_labels_per_example: usize,
    pub seed: u64,
    /// Extra perturbed copies per source example, sharing its group.
    #[serde(default)]
    pub augmented_copies: usize,
    #[serde(default)]
    pub augment_sigma: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("synthetic spec: {msg}")));
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.num_labels == 0 {
            return bad("num_labels must be positive");
        }
        if self.examples_per_label == 0 {
            return bad("examples_per_label must be positive");
        }
        if self.max_labels_per_example == 0 {
            return bad("max_labels_per_example must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be a nonnegative finite number");
        }
        if !(self.augment_sigma >= 0.0 && self.augment_sigma.is_finite()) {
            return bad("augment_sigma must be a nonnegative finite number");
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn draw_prototypes(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    (0..spec.num_labels)
        .map(|_| loop {
            if let Ok(p) = normalize(&gaussian(rng, spec.dim)) {
                break p;
            }
        })
        .collect()
}

/// The label prototypes `generate_synthetic` uses for `spec`.
pub fn synthetic_prototypes(spec: &SyntheticSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(draw_prototypes(&mut rng, spec))
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<EmbeddingDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prototypes = draw_prototypes(&mut rng, spec);
    let max_labels = spec.max_labels_per_example.min(spec.num_labels);

    let mut records =
        Vec::with_capacity(spec.num_labels * spec.examples_per_label * (1 + spec.augmented_copies));
    let mut next_id = 0u64;
    let mut next_group = 0u64;
    for forced in 0..spec.num_labels {
        for _ in 0..spec.examples_per_label {
            let size = rng.random_range(1..=max_labels);
            let mut labels = vec![forced as u32];
            for i in index::sample(&mut rng, spec.num_labels - 1, size - 1) {
                // Skip over the forced label.
                labels.push(if i >= forced { i + 1 } else { i } as u32);
            }

            let mut base = vec![0.0; spec.dim];
            for &l in &labels {
                for (b, p) in base.iter_mut().zip(&prototypes[l as usize]) {
                    *b += p;
                }
            }
            if spec.noise_sigma > 0.0 {
                for (b, n) in base.iter_mut().zip(gaussian(&mut rng, spec.dim)) {
                    *b += spec.noise_sigma * n;
                }
            }
            let source = normalize(&base)?;

            let group = next_group;
            next_group += 1;
            records.push(EmbeddingRecord::new(
                next_id,
                group,
                source.iter().map(|&x| x as f32).collect(),
                labels.clone(),
            ));
            next_id += 1;
            for _ in 0..spec.augmented_copies {
                let noise = gaussian(&mut rng, spec.dim);
                let copy: Vec<f64> = source
                    .iter()
                    .zip(noise)
                    .map(|(s, n)| s + spec.augment_sigma * n)
                    .collect();
                let copy = normalize(&copy)?;
                records.push(EmbeddingRecord::new(
                    next_id,
                    group,
                    copy.iter().map(|&x| x as f32).collect(),
                    labels.clone(),
                ));
                next_id += 1;
            }
        }
    }

    let width = spec.num_labels.to_string().len().max(2);
    let vocab = (0..spec.num_labels)
        .map(|l| format!("label_{l:0width$}"))
        .collect();
    EmbeddingDataset::new(spec.dim, vocab, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::l2_norm_f32;
    use proptest::prelude::*;

    fn spec(sigma: f64, max_labels: usize) -> SyntheticSpec {
        SyntheticSpec {
            dim: 8,
            num_labels: 3,
            examples_per_label: 10,
            noise_sigma: sigma,
            max_labels_per_example: max_labels,
            seed: 7,
            augmented_copies: 0,
            augment_sigma: 0.0,
        }
    }

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
        dot / (l2_norm_f32(a) * l2_norm_f32(b))
    }

    #[test]
    fn zero_noise_records_equal_their_prototype() {
        let s = spec(0.0, 1);
        let ds = generate_synthetic(&s).unwrap();
        let protos = synthetic_prototypes(&s).unwrap();
        assert_eq!(ds.records().len(), 30);
        for r in ds.records() {
            let p = &protos[r.labels[0] as usize];
            let p32: Vec<f32> = p.iter().map(|&x| x as f32).collect();
            assert_eq!(r.vector, p32);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let s = spec(0.05, 2);
        assert_eq!(
            generate_synthetic(&s).unwrap(),
            generate_synthetic(&s).unwrap()
        );
        let other = SyntheticSpec {
            seed: 8,
            ..s.clone()
        };
        assert_ne!(
            generate_synthetic(&s).unwrap(),
            generate_synthetic(&other).unwrap()
        );
    }

    #[test]
    fn same_label_pairs_are_closer_than_disjoint_pairs() {
        let s = SyntheticSpec {
            dim: 32,
            num_labels: 6,
            examples_per_label: 10,
            ..spec(0.05, 2)
        };
        let ds = generate_synthetic(&s).unwrap();
        let recs = ds.records();
        let mut same_min = f64::INFINITY;
        let mut disjoint_max = f64::NEG_INFINITY;
        let (mut same_n, mut disjoint_n) = (0, 0);
        for i in 0..recs.len() {
            for j in i + 1..recs.len() {
                let (a, b) = (&recs[i], &recs[j]);
                let c = cosine(&a.vector, &b.vector);
                if a.labels.len() == 1 && a.labels == b.labels {
                    same_min = same_min.min(c);
                    same_n += 1;
                } else if a.labels.iter().all(|l| !b.labels.contains(l)) {
                    disjoint_max = disjoint_max.max(c);
                    disjoint_n += 1;
                }
            }
        }
        assert!(same_n > 0 && disjoint_n > 0);
        assert!(same_min > disjoint_max, "{same_min} <= {disjoint_max}");
    }

    #[test]
    fn augmented_copies_share_group_and_labels() {
        let s = SyntheticSpec {
            augmented_copies: 3,
            augment_sigma: 0.02,
            ..spec(0.05, 2)
        };
        let ds = generate_synthetic(&s).unwrap();
        assert_eq!(ds.records().len(), 30 * 4);
        for members in ds.groups().values() {
            assert_eq!(members.len(), 4);
        }
    }

    #[test]
    fn rejects_invalid_spec() {
        assert!(generate_synthetic(&SyntheticSpec {
            dim: 1,
            ..spec(0.0, 1)
        })
        .is_err());
        assert!(generate_synthetic(&SyntheticSpec {
            examples_per_label: 0,
            ..spec(0.0, 1)
        })
        .is_err());
        assert!(generate_synthetic(&spec(-1.0, 1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn generated_datasets_satisfy_invariants(
            dim in 2usize..24,
            num_labels in 1usize..8,
            per_label in 1usize..6,
            sigma in 0.0f64..0.5,
            max_labels in 1usize..4,
            copies in 0usize..3,
            seed: u64,
        ) {
            let s = SyntheticSpec {
                dim, num_labels, examples_per_label: per_label, noise_sigma: sigma,
                max_labels_per_example: max_labels, seed, augmented_copies: copies, augment_sigma: 0.1,
            };
            let ds = generate_synthetic(&s).unwrap();
            // Re-validate through the public constructor.
            let again = EmbeddingDataset::new(ds.dim(), ds.label_vocab().to_vec(), ds.records().to_vec()).unwrap();
            prop_assert_eq!(&again, &ds);
            prop_assert!(ds.norm_violations(1e-6).is_empty());
            for l in 0..num_labels {
                let count = ds.records().iter().filter(|r| r.has_label(l)).count();
                prop_assert!(count >= per_label);
            }
            for r in ds.records() {
                prop_assert!(!r.labels.is_empty() && r.labels.len() <= max_labels);
            }
        }

        #[test]
        fn normalize_is_idempotent(v in proptest::collection::vec(-10.0f64..10.0, 1..32)) {
            prop_assume!(v.iter().any(|&x| x.abs() > 1e-6));
            let once = normalize(&v).unwrap();
            let twice = normalize(&once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-6);
            }
            prop_assert!((crate::store::l2_norm(&once) - 1.0).abs() < 1e-6);
        }
    }
}
