//! Episode-averaged experiments: few-shot runs, ablation grids, continual
//! runs and threshold sweeps.
//!
//! Episodes run on a worker pool of `jobs` threads; results are always
//! collected in episode order, so outputs do not depend on scheduling.

mod output;
mod summary;

pub use output::{read_episodes_csv, write_ablation, write_continual, write_fewshot, write_sweep};
pub use summary::Stat;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continual::{run_continual, score_matrix, ContinualConfig, ContinualTrace};
use crate::episode::{AugMode, Episode, EpisodeSampler, EpisodeSpec};
use crate::error::{Error, Result};
use crate::imprint::{train, Head, ImprintClassifier, TrainConfig, TrainingSet};
use crate::matrix::Matrix;
use crate::metrics::{
    best_threshold, compute_all, overall_f1_at, threshold_grid, EvalBatch, MetricsReport, Mode,
    METRIC_NAMES,
};
use crate::store::{generate_synthetic, load_dataset, EmbeddingDataset, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub episodes: EpisodeSpec,
    pub train: TrainConfig,
    pub head: Head,
    pub threshold: f64,
    pub grid_step: f64,
    pub aug_mode: AugMode,
    /// Extra verbatim copies of every train row.
    pub trivial_repeats: usize,
    pub jobs: usize,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
}

/// Episode count used when none is given.
pub const DEFAULT_EPISODES: usize = 100;

impl ExperimentConfig {
    /// 5-way 5-shot, 15 test, 100 episodes, 60 epochs, sigmoid head at 0.5.
    pub fn new(source: DatasetSource) -> Self {
        Self {
            source,
            episodes: EpisodeSpec::new(5, 5, 15, DEFAULT_EPISODES, 0),
            train: TrainConfig::default(),
            head: Head::Sigmoid,
            threshold: 0.5,
            grid_step: 0.01,
            aug_mode: AugMode::AllCopies,
            trivial_repeats: 0,
            jobs: 1,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.episodes.validate()?;
        self.train.validate()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        threshold_grid(self.grid_step)?;
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be positive".into()));
        }
        if let DatasetSource::Synthetic(spec) = &self.source {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        threshold_grid(self.grid_step)
    }

    pub fn load_dataset(&self) -> Result<EmbeddingDataset> {
        match &self.source {
            DatasetSource::Path(p) => load_dataset(p),
            DatasetSource::Synthetic(spec) => generate_synthetic(spec),
        }
    }

    fn continual_config(&self, reimprint: bool) -> Result<ContinualConfig> {
        Ok(ContinualConfig {
            train: self.train.clone(),
            threshold: self.threshold,
            grid: self.grid()?,
            reimprint,
        })
    }
}

/// Metrics of one evaluated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub labels: Vec<String>,
    pub report: MetricsReport,
    pub best_threshold: f64,
    pub best_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// The 13 metrics followed by `best_threshold` and `best_f1`.
    pub stats: Vec<Stat>,
    pub config: ExperimentConfig,
    pub wall_clock_secs: f64,
}

impl RunSummary {
    pub fn stat(&self, name: &str) -> Option<&Stat> {
        self.stats.iter().find(|s| s.name == name)
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.stat(name).and_then(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FewShotRun {
    pub episodes: Vec<EpisodeResult>,
    pub summary: RunSummary,
}

/// The 13 metric stats followed by `best_threshold` and `best_f1`.
pub fn episode_stats(results: &[EpisodeResult]) -> Vec<Stat> {
    let mut stats: Vec<Stat> = METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| Stat::of(*name, results.iter().map(|r| r.report.values()[i])))
        .collect();
    stats.push(Stat::of(
        "best_threshold",
        results.iter().map(|r| Some(r.best_threshold)),
    ));
    stats.push(Stat::of("best_f1", results.iter().map(|r| Some(r.best_f1))));
    stats
}

pub fn summarize(
    results: &[EpisodeResult],
    config: &ExperimentConfig,
    wall_clock_secs: f64,
) -> RunSummary {
    RunSummary {
        stats: episode_stats(results),
        config: config.clone(),
        wall_clock_secs,
    }
}

fn metric_mode(dataset: &EmbeddingDataset) -> Mode {
    if dataset.is_single_label() {
        Mode::SingleLabel
    } else {
        Mode::Multilabel
    }
}

/// Truth and scores of one episode's test split after imprinting and training.
pub struct ScoredEpisode {
    pub classifier: ImprintClassifier,
    pub truth: Matrix<u8>,
    pub scores: Matrix<f64>,
    pub loss_trace: Vec<f64>,
}

/// Imprints on the episode's train split, trains, and scores the test split.
pub fn score_episode(
    dataset: &EmbeddingDataset,
    episode: &Episode<'_>,
    cfg: &ExperimentConfig,
) -> Result<ScoredEpisode> {
    let ep = episode.with_augmentation(cfg.aug_mode, cfg.trivial_repeats);
    let classes: Vec<(String, Vec<&[f32]>)> = (0..ep.sampled_labels.len())
        .map(|j| {
            let name = dataset.label_name(ep.sampled_labels[j]).to_string();
            let vectors = ep
                .train_with_label(j)
                .into_iter()
                .map(|r| r.vector.as_slice())
                .collect();
            (name, vectors)
        })
        .collect();
    let mut clf = ImprintClassifier::imprint(dataset.dim(), cfg.head, cfg.threshold, classes)?;
    let loss_trace = if cfg.train.epochs > 0 {
        let set = TrainingSet::from_records(dataset.dim(), &ep.train, &ep.sampled_labels)?;
        train(&mut clf, &set, &cfg.train)?
    } else {
        Vec::new()
    };
    let truth = ep.test_targets();
    let scores = score_matrix(&clf, &ep.test)?;
    Ok(ScoredEpisode {
        classifier: clf,
        truth,
        scores,
        loss_trace,
    })
}

pub fn evaluate_episode(
    dataset: &EmbeddingDataset,
    episode: &Episode<'_>,
    cfg: &ExperimentConfig,
) -> Result<EpisodeResult> {
    let scored = score_episode(dataset, episode, cfg)?;
    let (best_t, best_f1) = best_threshold(&scored.truth, &scored.scores, &cfg.grid()?)?;
    let batch = match cfg.head {
        Head::Sigmoid => EvalBatch::thresholded(scored.truth, scored.scores, cfg.threshold)?,
        Head::Softmax => EvalBatch::argmax(scored.truth, scored.scores)?,
    };
    let report = compute_all(&batch, metric_mode(dataset))?;
    Ok(EpisodeResult {
        episode: episode.index,
        labels: episode
            .sampled_labels
            .iter()
            .map(|&l| dataset.label_name(l).to_string())
            .collect(),
        report,
        best_threshold: best_t,
        best_f1,
    })
}

/// Runs `f` for every episode on a pool of `jobs` threads, in episode order.
fn for_each_episode<'a, T: Send>(
    dataset: &'a EmbeddingDataset,
    cfg: &ExperimentConfig,
    f: impl Fn(&Episode<'a>) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let sampler = EpisodeSampler::new(dataset);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.episodes.n_episodes)
            .into_par_iter()
            .map(|i| {
                sampler
                    .episode(&cfg.episodes, i)
                    .and_then(|ep| f(&ep))
                    .map_err(|e| Error::Episode {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect()
    })
}

pub fn run_fewshot(cfg: &ExperimentConfig, dataset: &EmbeddingDataset) -> Result<FewShotRun> {
    cfg.validate()?;
    let start = Instant::now();
    let episodes = for_each_episode(dataset, cfg, |ep| evaluate_episode(dataset, ep, cfg))?;
    let summary = summarize(&episodes, cfg, start.elapsed().as_secs_f64());
    Ok(FewShotRun { episodes, summary })
}

/// Mean overall F1 across episodes at each grid threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub f1: Stat,
}

pub fn run_threshold_sweep(
    cfg: &ExperimentConfig,
    dataset: &EmbeddingDataset,
) -> Result<Vec<ThresholdPoint>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let per_episode = for_each_episode(dataset, cfg, |ep| {
        let s = score_episode(dataset, ep, cfg)?;
        Ok(grid
            .iter()
            .map(|&t| overall_f1_at(&s.truth, &s.scores, t))
            .collect::<Vec<f64>>())
    })?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &t)| ThresholdPoint {
            threshold: t,
            f1: Stat::of("overall_f1", per_episode.iter().map(|row| Some(row[i]))),
        })
        .collect())
}

/// How train rows are expanded in an ablation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AugSetting {
    pub mode: AugMode,
    pub trivial_repeats: usize,
}

impl fmt::Display for AugSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mode)?;
        if self.trivial_repeats > 0 {
            write!(f, "+t{}", self.trivial_repeats)?;
        }
        Ok(())
    }
}

impl FromStr for AugSetting {
    type Err = Error;

    /// `all`, `unaugmented`, `t10` (unaugmented + 10 repeats) or `all+t10`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_repeats = |r: &str| {
            r.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad trivial repeat count in {s:?}")))
        };
        if let Some((mode, reps)) = s.split_once("+t") {
            return Ok(Self {
                mode: mode.parse()?,
                trivial_repeats: parse_repeats(reps)?,
            });
        }
        if let Some(reps) = s.strip_prefix('t') {
            return Ok(Self {
                mode: AugMode::UnaugmentedOnly,
                trivial_repeats: parse_repeats(reps)?,
            });
        }
        Ok(Self {
            mode: s.parse()?,
            trivial_repeats: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationAxes {
    pub epochs: Vec<usize>,
    pub aug: Vec<AugSetting>,
    pub heads: Vec<Head>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub epochs: usize,
    pub aug: AugSetting,
    pub head: Head,
    pub summary: RunSummary,
}

/// One few-shot run per cell of `epochs × aug × heads`, all on the same episodes.
pub fn run_ablation_grid(
    cfg: &ExperimentConfig,
    dataset: &EmbeddingDataset,
    axes: &AblationAxes,
) -> Result<Vec<AblationCell>> {
    if axes.epochs.is_empty() || axes.aug.is_empty() || axes.heads.is_empty() {
        return Err(Error::InvalidConfig(
            "every ablation axis needs at least one value".into(),
        ));
    }
    let mut cells = Vec::with_capacity(axes.epochs.len() * axes.aug.len() * axes.heads.len());
    for &epochs in &axes.epochs {
        for &aug in &axes.aug {
            for &head in &axes.heads {
                let mut cell_cfg = cfg.clone();
                cell_cfg.train.epochs = epochs;
                cell_cfg.aug_mode = aug.mode;
                cell_cfg.trivial_repeats = aug.trivial_repeats;
                cell_cfg.head = head;
                let run = run_fewshot(&cell_cfg, dataset)?;
                cells.push(AblationCell {
                    epochs,
                    aug,
                    head,
                    summary: run.summary,
                });
            }
        }
    }
    Ok(cells)
}

/// Per-step means across episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAggregate {
    pub step: usize,
    pub n_visible: usize,
    /// The 13 metrics, then `fixed_threshold_f1`, `best_threshold`, `best_f1`.
    pub stats: Vec<Stat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinualRun {
    pub traces: Vec<ContinualTrace>,
    pub aggregate: Vec<StepAggregate>,
}

pub fn run_continual_experiment(
    cfg: &ExperimentConfig,
    dataset: &EmbeddingDataset,
    reimprint: bool,
) -> Result<ContinualRun> {
    cfg.validate()?;
    if cfg.head != Head::Sigmoid {
        return Err(Error::InvalidConfig(
            "continual learning requires the sigmoid head".into(),
        ));
    }
    let ccfg = cfg.continual_config(reimprint)?;
    let traces = for_each_episode(dataset, cfg, |ep| {
        let ep = ep.with_augmentation(cfg.aug_mode, cfg.trivial_repeats);
        run_continual(dataset, &ep, &ccfg)
    })?;

    let n_steps = cfg.episodes.n_way;
    let aggregate = (0..n_steps)
        .map(|s| {
            let steps: Vec<_> = traces.iter().map(|t| &t.steps[s]).collect();
            let mut stats: Vec<Stat> = METRIC_NAMES
                .iter()
                .enumerate()
                .map(|(i, name)| Stat::of(*name, steps.iter().map(|st| st.report.values()[i])))
                .collect();
            stats.push(Stat::of(
                "fixed_threshold_f1",
                steps.iter().map(|st| Some(st.fixed_threshold_f1)),
            ));
            stats.push(Stat::of(
                "best_threshold",
                steps.iter().map(|st| Some(st.best_threshold)),
            ));
            stats.push(Stat::of("best_f1", steps.iter().map(|st| Some(st.best_f1))));
            StepAggregate {
                step: s + 1,
                n_visible: s + 1,
                stats,
            }
        })
        .collect();
    Ok(ContinualRun { traces, aggregate })
}
