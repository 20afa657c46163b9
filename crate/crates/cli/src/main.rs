//! `mwi`: synthesize datasets, run few-shot, ablation, continual and threshold
//! experiments, and inspect embedding and classifier files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error.

mod metrics_input;
mod table;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mwi::episode::{AugMode, EpisodeSpec};
use mwi::experiment::{
    episode_stats, read_episodes_csv, run_ablation_grid, run_continual_experiment, run_fewshot,
    run_threshold_sweep, write_ablation, write_continual, write_fewshot, write_sweep, AblationAxes,
    AugSetting, DatasetSource, ExperimentConfig, DEFAULT_EPISODES,
};
use mwi::imprint::{read_classifier, Head, TrainConfig, MWIC_MAGIC};
use mwi::store::{
    generate_synthetic, read_dataset, save_dataset, SyntheticSpec, MWIE_MAGIC, UNIT_NORM_TOLERANCE,
};
use mwi::Error;

#[derive(Debug, Parser)]
#[command(
    name = "mwi",
    version,
    about = "Multilabel weight imprinting experiments over frozen embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic .mwie dataset.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        /// Output .mwie file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Episode-averaged few-shot run.
    Fewshot(ExperimentArgs),
    /// One few-shot run per cell of epochs × augmentation × head.
    Ablate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated epoch counts.
        #[arg(long, value_delimiter = ',', default_value = "0,60")]
        epochs_axis: Vec<usize>,
        /// Comma-separated augmentation settings: all, unaugmented, tN, all+tN.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        aug_axis: Vec<String>,
        /// Comma-separated heads.
        #[arg(long, value_delimiter = ',', default_value = "sigmoid,softmax")]
        heads: Vec<Head>,
    },
    /// Label-by-label continual learning with experience replay.
    Continual {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Re-imprint every visible column from the replay buffer before each retrain.
        #[arg(long)]
        reimprint: bool,
    },
    /// Mean overall F1 at every threshold of the grid.
    SweepThreshold(ExperimentArgs),
    /// Score a JSON batch of truth and scores, or re-aggregate an episodes.csv.
    Metrics {
        /// JSON batch: {"truth": [[0,1],...], "scores": [[...],...]} with optional
        /// "predictions", "threshold", "mode" and "decision" ("threshold" | "argmax").
        #[arg(
            required_unless_present = "episodes_csv",
            conflicts_with = "episodes_csv"
        )]
        input: Option<PathBuf>,
        /// Recompute means and standard errors from an episodes.csv.
        #[arg(long)]
        episodes_csv: Option<PathBuf>,
    },
    /// Dump a .mwie dataset or .mwic classifier as JSON.
    ExportJson {
        input: PathBuf,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a .mwie file parses and every vector has unit norm.
    Validate {
        input: PathBuf,
        #[arg(long, default_value_t = UNIT_NORM_TOLERANCE)]
        tolerance: f64,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 512)]
    dim: usize,
    /// Number of labels.
    #[arg(long, default_value_t = 20)]
    labels: usize,
    /// Examples generated per label.
    #[arg(long, default_value_t = 40)]
    per_label: usize,
    /// Standard deviation of the Gaussian noise added to prototype sums.
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Largest label set per example; 1 gives single-label data.
    #[arg(long, default_value_t = 1)]
    max_labels: usize,
    /// Augmented copies stored alongside each example in its group.
    #[arg(long, default_value_t = 0)]
    aug_copies: usize,
    #[arg(long, default_value_t = 0.0)]
    aug_sigma: f64,
    /// Generator seed.
    #[arg(long = "data-seed", default_value_t = 0)]
    data_seed: u64,
}

impl SynthArgs {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            dim: self.dim,
            num_labels: self.labels,
            examples_per_label: self.per_label,
            noise_sigma: self.sigma,
            max_labels_per_example: self.max_labels,
            seed: self.data_seed,
            augmented_copies: self.aug_copies,
            augment_sigma: self.aug_sigma,
        }
    }
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// A .mwie dataset; without it a synthetic dataset is generated.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, default_value_t = 5)]
    ways: usize,
    #[arg(long, default_value_t = 5)]
    shots: usize,
    #[arg(long, default_value_t = 15)]
    test_per_class: usize,
    #[arg(long, default_value_t = DEFAULT_EPISODES)]
    episodes: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = Head::Sigmoid)]
    head: Head,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// Extra verbatim copies of every train row.
    #[arg(long, default_value_t = 0)]
    trivial_repeats: usize,
    /// all: every copy in a train group; unaugmented: only the first.
    #[arg(long, default_value_t = AugMode::AllCopies)]
    aug_mode: AugMode,
    /// Episode sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Run directory for config.json and CSV outputs.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let source = match &self.data {
            Some(path) => DatasetSource::Path(path.clone()),
            None => DatasetSource::Synthetic(self.synth.spec()),
        };
        let mut cfg = ExperimentConfig::new(source);
        cfg.episodes = EpisodeSpec::new(
            self.ways,
            self.shots,
            self.test_per_class,
            self.episodes,
            self.seed,
        );
        cfg.train.epochs = self.epochs;
        cfg.train.learning_rate = self.lr;
        cfg.head = self.head;
        cfg.threshold = self.threshold;
        cfg.grid_step = self.grid_step;
        cfg.trivial_repeats = self.trivial_repeats;
        cfg.aug_mode = self.aug_mode;
        cfg.jobs = self.jobs;
        cfg.out_dir = self.out.clone();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    let result = run(cli.command, &mut out);
    // A closed pipe (`mwi ... | head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}

/// Runs one subcommand, appending its report to `out`.
fn run(command: Command, out: &mut String) -> Result<(), Error> {
    match command {
        Command::Synth { synth, out: dest } => {
            let ds = generate_synthetic(&synth.spec())?;
            save_dataset(&ds, &dest)?;
            let _ = writeln!(
                out,
                "wrote {} records ({} labels, dim {}) to {}",
                ds.records().len(),
                ds.num_labels(),
                ds.dim(),
                dest.display()
            );
        }
        Command::Fewshot(args) => {
            let cfg = args.config()?;
            let ds = cfg.load_dataset()?;
            let run = run_fewshot(&cfg, &ds)?;
            if let Some(dir) = &cfg.out_dir {
                write_fewshot(dir, &cfg, &run)?;
            }
            out.push_str(&table::stats(&run.summary.stats));
            let _ = writeln!(
                out,
                "{} episodes in {:.2}s",
                run.episodes.len(),
                run.summary.wall_clock_secs
            );
        }
        Command::Ablate {
            exp,
            epochs_axis,
            aug_axis,
            heads,
        } => {
            let cfg = exp.config()?;
            let axes = AblationAxes {
                epochs: epochs_axis,
                aug: aug_axis
                    .iter()
                    .map(|s| s.parse::<AugSetting>())
                    .collect::<Result<_, _>>()?,
                heads,
            };
            let ds = cfg.load_dataset()?;
            let cells = run_ablation_grid(&cfg, &ds, &axes)?;
            if let Some(dir) = &cfg.out_dir {
                write_ablation(dir, &cfg, &cells)?;
            }
            out.push_str(&table::ablation(&cells));
        }
        Command::Continual { exp, reimprint } => {
            let cfg = exp.config()?;
            let ds = cfg.load_dataset()?;
            let run = run_continual_experiment(&cfg, &ds, reimprint)?;
            if let Some(dir) = &cfg.out_dir {
                write_continual(dir, &cfg, &run)?;
            }
            out.push_str(&table::continual(&run.aggregate));
        }
        Command::SweepThreshold(args) => {
            let cfg = args.config()?;
            let ds = cfg.load_dataset()?;
            let points = run_threshold_sweep(&cfg, &ds)?;
            if let Some(dir) = &cfg.out_dir {
                write_sweep(dir, &cfg, &points)?;
            }
            out.push_str(&table::sweep(&points));
        }
        Command::Metrics {
            input,
            episodes_csv,
        } => {
            if let Some(path) = episodes_csv {
                let stats = episode_stats(&read_episodes_csv(&path)?);
                out.push_str(&table::stats_csv(&stats));
                out.push('\n');
                out.push_str(&table::stats(&stats));
            } else if let Some(path) = input {
                let report = metrics_input::evaluate(
                    &fs::read_to_string(&path).map_err(Error::file(&path))?,
                )?;
                out.push_str(&table::report_csv(&report));
                out.push('\n');
                out.push_str(&table::report(&report));
            }
        }
        Command::ExportJson { input, out: dest } => {
            let json = export_json(&input)?;
            match dest {
                Some(path) => fs::write(&path, json + "\n").map_err(Error::file(&path))?,
                None => {
                    out.push_str(&json);
                    out.push('\n');
                }
            }
        }
        Command::Validate { input, tolerance } => {
            let ds = read_dataset(&fs::read(&input).map_err(Error::file(&input))?)?;
            let violations = ds.norm_violations(tolerance);
            for v in &violations {
                out.push_str(v);
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "{}: {} records, {} labels, dim {}, {} errors",
                input.display(),
                ds.records().len(),
                ds.num_labels(),
                ds.dim(),
                violations.len()
            );
            if !violations.is_empty() {
                return Err(Error::InvalidDataset(format!(
                    "{} vectors are not unit norm",
                    violations.len()
                )));
            }
        }
    }
    Ok(())
}

/// Chooses the decoder by the file's magic bytes.
fn export_json(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(Error::file(path))?;
    if bytes.starts_with(&MWIE_MAGIC) {
        return read_dataset(&bytes)?.to_json();
    }
    if bytes.starts_with(&MWIC_MAGIC) {
        let clf = read_classifier(&bytes)?;
        let columns: Vec<&[f64]> = (0..clf.num_classes()).map(|k| clf.column(k)).collect();
        let value = serde_json::json!({
            "dim": clf.dim(),
            "head": clf.head(),
            "threshold": clf.threshold(),
            "class_names": clf.class_names(),
            "columns": columns,
        });
        return Ok(serde_json::to_string_pretty(&value)?);
    }
    Err(Error::InvalidDataset(format!(
        "{} is neither a .mwie nor a .mwic file",
        path.display()
    )))
}
