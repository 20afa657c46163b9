//! Seeded n-way k-shot episode sampling.
//!
//! Sampling works on groups (a source example and its augmented copies), so
//! copies of one example never straddle the train/test split. Labels are
//! visited in sampled order; each label draws its train and test groups from
//! the groups carrying it that no earlier label in the episode has taken.
//!
//! Episode `i` is seeded with [`episode_seed`]`(seed, i)`, so episodes are
//! independent of how many are requested and may be built in any order.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::store::{EmbeddingDataset, EmbeddingRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub n_way: usize,
    pub n_shot: usize,
    pub n_test: usize,
    pub n_episodes: usize,
    pub seed: u64,
}

impl EpisodeSpec {
    pub fn new(n_way: usize, n_shot: usize, n_test: usize, n_episodes: usize, seed: u64) -> Self {
        Self {
            n_way,
            n_shot,
            n_test,
            n_episodes,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_way < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_way {} must be at least 2",
                self.n_way
            )));
        }
        if self.n_shot == 0 || self.n_test == 0 {
            return Err(Error::InvalidConfig(
                "n_shot and n_test must be positive".into(),
            ));
        }
        if self.n_episodes == 0 {
            return Err(Error::InvalidConfig("n_episodes must be positive".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer (Steele, Lea & Flood), constants
/// `0x9E3779B97F4A7C15`, `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(seed ^ splitmix64(index))`.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

/// Which rows of each train group enter training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugMode {
    /// The source example and all of its augmented copies.
    AllCopies,
    /// Only the source example (lowest record id in the group).
    UnaugmentedOnly,
}

impl fmt::Display for AugMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AugMode::AllCopies => "all",
            AugMode::UnaugmentedOnly => "unaugmented",
        })
    }
}

impl FromStr for AugMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all-copies" => Ok(AugMode::AllCopies),
            "unaugmented" | "unaugmented-only" => Ok(AugMode::UnaugmentedOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown augmentation mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode<'a> {
    pub index: usize,
    /// Dataset label indices, in sampling order.
    pub sampled_labels: Vec<usize>,
    pub train: Vec<&'a EmbeddingRecord>,
    /// Position in `sampled_labels` of the label each train record was drawn for.
    pub train_origin: Vec<usize>,
    pub test: Vec<&'a EmbeddingRecord>,
    pub test_origin: Vec<usize>,
}

impl<'a> Episode<'a> {
    /// 0/1 targets over `sampled_labels` for the train split.
    pub fn train_targets(&self) -> Matrix<u8> {
        target_matrix(&self.train, &self.sampled_labels)
    }

    pub fn test_targets(&self) -> Matrix<u8> {
        target_matrix(&self.test, &self.sampled_labels)
    }

    /// Train records carrying sampled label `j`.
    pub fn train_with_label(&self, j: usize) -> Vec<&'a EmbeddingRecord> {
        let label = self.sampled_labels[j];
        self.train
            .iter()
            .copied()
            .filter(|r| r.has_label(label))
            .collect()
    }

    /// Applies an augmentation policy to the train split: optionally drops
    /// augmented copies, then repeats every remaining row `trivial_repeats`
    /// extra times.
    pub fn with_augmentation(&self, mode: AugMode, trivial_repeats: usize) -> Episode<'a> {
        let mut train = Vec::new();
        let mut origin = Vec::new();
        let mut prev_group = None;
        for (r, &o) in self.train.iter().zip(&self.train_origin) {
            let first_of_group = prev_group != Some(r.group_id);
            prev_group = Some(r.group_id);
            if mode == AugMode::UnaugmentedOnly && !first_of_group {
                continue;
            }
            for _ in 0..=trivial_repeats {
                train.push(*r);
                origin.push(o);
            }
        }
        Episode {
            index: self.index,
            sampled_labels: self.sampled_labels.clone(),
            train,
            train_origin: origin,
            test: self.test.clone(),
            test_origin: self.test_origin.clone(),
        }
    }
}

/// Entry `(r, j)` is 1 iff `labels[j]` is among record `r`'s labels.
pub fn target_matrix(records: &[&EmbeddingRecord], labels: &[usize]) -> Matrix<u8> {
    let mut m = Matrix::filled(records.len(), labels.len(), 0u8);
    for (r, rec) in records.iter().enumerate() {
        for (j, &l) in labels.iter().enumerate() {
            if rec.has_label(l) {
                m.set(r, j, 1);
            }
        }
    }
    m
}

/// Precomputed group index over a dataset.
pub struct EpisodeSampler<'a> {
    dataset: &'a EmbeddingDataset,
    /// Members of each group, designated (lowest record id) copy first.
    groups: Vec<Vec<usize>>,
    /// Per label, the positions in `groups` carrying it.
    label_groups: Vec<Vec<usize>>,
}

impl<'a> EpisodeSampler<'a> {
    pub fn new(dataset: &'a EmbeddingDataset) -> Self {
        let groups: Vec<Vec<usize>> = dataset.groups().into_values().collect();
        let mut label_groups = vec![Vec::new(); dataset.num_labels()];
        for (g, members) in groups.iter().enumerate() {
            for &l in &dataset.records()[members[0]].labels {
                label_groups[l as usize].push(g);
            }
        }
        Self {
            dataset,
            groups,
            label_groups,
        }
    }

    /// Builds episode `index` of `spec`.
    pub fn episode(&self, spec: &EpisodeSpec, index: usize) -> Result<Episode<'a>> {
        spec.validate()?;
        let num_labels = self.dataset.num_labels();
        if num_labels < spec.n_way {
            return Err(Error::InsufficientLabels {
                needed: spec.n_way,
                available: num_labels,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(spec.seed, index));
        let sampled_labels = index::sample(&mut rng, num_labels, spec.n_way).into_vec();

        let records = self.dataset.records();
        let need = spec.n_shot + spec.n_test;
        let mut taken: HashSet<usize> = HashSet::new();
        let mut episode = Episode {
            index,
            sampled_labels: sampled_labels.clone(),
            train: Vec::new(),
            train_origin: Vec::new(),
            test: Vec::new(),
            test_origin: Vec::new(),
        };
        for (j, &label) in sampled_labels.iter().enumerate() {
            let available: Vec<usize> = self.label_groups[label]
                .iter()
                .copied()
                .filter(|g| !taken.contains(g))
                .collect();
            if available.len() < need {
                return Err(Error::InsufficientExamples {
                    label: self.dataset.label_name(label).to_string(),
                    needed: need,
                    available: available.len(),
                });
            }
            let picks = index::sample(&mut rng, available.len(), need).into_vec();
            for (p, &pick) in picks.iter().enumerate() {
                let g = available[pick];
                taken.insert(g);
                let members = &self.groups[g];
                if p < spec.n_shot {
                    for &m in members {
                        episode.train.push(&records[m]);
                        episode.train_origin.push(j);
                    }
                } else {
                    episode.test.push(&records[members[0]]);
                    episode.test_origin.push(j);
                }
            }
        }
        Ok(episode)
    }

    pub fn episodes(&self, spec: &EpisodeSpec) -> Result<Vec<Episode<'a>>> {
        (0..spec.n_episodes)
            .map(|i| self.episode(spec, i))
            .collect()
    }
}

/// Samples all `spec.n_episodes` episodes.
pub fn sample_episodes<'a>(
    dataset: &'a EmbeddingDataset,
    spec: &EpisodeSpec,
) -> Result<Vec<Episode<'a>>> {
    EpisodeSampler::new(dataset).episodes(spec)
}
