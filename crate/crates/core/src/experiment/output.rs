//! Run directories and their CSV files.
//!
//! Floats are written in Rust's shortest round-trip form, so every value
//! parses back to the identical `f64`. Missing values are written as `NA`.

use std::fs;
use std::path::Path;

use super::{
    AblationCell, ContinualRun, EpisodeResult, ExperimentConfig, FewShotRun, Stat, ThresholdPoint,
};
use crate::continual::ContinualTrace;
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, METRIC_NAMES};

const NA: &str = "NA";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == NA {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::InvalidDataset(format!("bad number {s:?} in csv")))
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;
    Ok(())
}

fn stat_columns(stats: &[Stat]) -> Vec<String> {
    stats
        .iter()
        .flat_map(|s| [format!("{}_mean", s.name), format!("{}_stderr", s.name)])
        .collect()
}

fn stat_values(stats: &[Stat]) -> Vec<String> {
    stats
        .iter()
        .flat_map(|s| [fmt_opt(s.mean), fmt_opt(s.stderr)])
        .collect()
}

fn write_stats(path: &Path, stats: &[Stat]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "mean", "stderr", "n"])?;
    for s in stats {
        w.write_record([
            s.name.clone(),
            fmt_opt(s.mean),
            fmt_opt(s.stderr),
            s.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn episode_header() -> Vec<String> {
    let mut h = vec!["episode".to_string(), "labels".to_string()];
    h.extend(METRIC_NAMES.iter().map(|s| s.to_string()));
    h.push("best_threshold".into());
    h.push("best_f1".into());
    h
}

/// `config.json`, `episodes.csv` and `summary.csv`.
pub fn write_fewshot(dir: &Path, cfg: &ExperimentConfig, run: &FewShotRun) -> Result<()> {
    write_config(dir, cfg)?;
    let mut w = csv::Writer::from_path(dir.join("episodes.csv"))?;
    w.write_record(episode_header())?;
    for e in &run.episodes {
        let mut row = vec![e.episode.to_string(), e.labels.join(";")];
        row.extend(e.report.values().into_iter().map(fmt_opt));
        row.push(e.best_threshold.to_string());
        row.push(e.best_f1.to_string());
        w.write_record(row)?;
    }
    w.flush()?;
    write_stats(&dir.join("summary.csv"), &run.summary.stats)
}

/// Parses an `episodes.csv` written by [`write_fewshot`].
pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeResult>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != episode_header() {
        return Err(Error::InvalidDataset(format!(
            "{} is not an episodes csv",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let episode = field(0)
            .parse()
            .map_err(|_| Error::InvalidDataset(format!("bad episode index {:?}", field(0))))?;
        let labels = if field(1).is_empty() {
            Vec::new()
        } else {
            field(1).split(';').map(str::to_string).collect()
        };
        let mut values = [None; 13];
        for (i, v) in values.iter_mut().enumerate() {
            *v = parse_opt(field(2 + i))?;
        }
        let required = |i: usize| {
            parse_opt(field(i))?
                .ok_or_else(|| Error::InvalidDataset("missing best threshold columns".into()))
        };
        out.push(EpisodeResult {
            episode,
            labels,
            report: MetricsReport::from_values(values),
            best_threshold: required(15)?,
            best_f1: required(16)?,
        });
    }
    Ok(out)
}

/// `config.json` and `ablation.csv`, one row per cell.
pub fn write_ablation(dir: &Path, cfg: &ExperimentConfig, cells: &[AblationCell]) -> Result<()> {
    write_config(dir, cfg)?;
    let mut w = csv::Writer::from_path(dir.join("ablation.csv"))?;
    if let Some(first) = cells.first() {
        let mut header: Vec<String> = ["epochs", "aug", "head", "n_episodes"]
            .map(String::from)
            .to_vec();
        header.extend(stat_columns(&first.summary.stats));
        w.write_record(header)?;
    }
    for c in cells {
        let mut row = vec![
            c.epochs.to_string(),
            c.aug.to_string(),
            c.head.to_string(),
            c.summary.config.episodes.n_episodes.to_string(),
        ];
        row.extend(stat_values(&c.summary.stats));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace(path: &Path, trace: &ContinualTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["step".to_string(), "n_visible".to_string()];
    header.extend(METRIC_NAMES.iter().map(|s| s.to_string()));
    header.extend(["fixed_threshold_f1", "best_threshold", "best_f1"].map(String::from));
    w.write_record(header)?;
    for s in &trace.steps {
        let mut row = vec![s.step.to_string(), s.n_visible.to_string()];
        row.extend(s.report.values().into_iter().map(fmt_opt));
        row.push(s.fixed_threshold_f1.to_string());
        row.push(s.best_threshold.to_string());
        row.push(s.best_f1.to_string());
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `config.json`, `continual/episode_NNNN.csv` per episode and
/// `continual_summary.csv` with per-step means.
pub fn write_continual(dir: &Path, cfg: &ExperimentConfig, run: &ContinualRun) -> Result<()> {
    write_config(dir, cfg)?;
    let traces = dir.join("continual");
    fs::create_dir_all(&traces)?;
    for t in &run.traces {
        write_trace(&traces.join(format!("episode_{:04}.csv", t.episode)), t)?;
    }
    let mut w = csv::Writer::from_path(dir.join("continual_summary.csv"))?;
    if let Some(first) = run.aggregate.first() {
        let mut header: Vec<String> = ["step", "n_visible", "n_episodes"]
            .map(String::from)
            .to_vec();
        header.extend(stat_columns(&first.stats));
        w.write_record(header)?;
    }
    for a in &run.aggregate {
        let mut row = vec![
            a.step.to_string(),
            a.n_visible.to_string(),
            run.traces.len().to_string(),
        ];
        row.extend(stat_values(&a.stats));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `config.json` and `thresholds.csv`.
pub fn write_sweep(dir: &Path, cfg: &ExperimentConfig, points: &[ThresholdPoint]) -> Result<()> {
    write_config(dir, cfg)?;
    let mut w = csv::Writer::from_path(dir.join("thresholds.csv"))?;
    w.write_record(["threshold", "overall_f1_mean", "overall_f1_stderr", "n"])?;
    for p in points {
        w.write_record([
            p.threshold.to_string(),
            fmt_opt(p.f1.mean),
            fmt_opt(p.f1.stderr),
            p.f1.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{episode_stats, run_fewshot, DatasetSource};
    use crate::store::SyntheticSpec;

    #[test]
    fn episodes_csv_round_trips() {
        let mut cfg = ExperimentConfig::new(DatasetSource::Synthetic(SyntheticSpec {
            dim: 16,
            num_labels: 6,
            examples_per_label: 12,
            noise_sigma: 0.1,
            max_labels_per_example: 2,
            seed: 4,
            augmented_copies: 0,
            augment_sigma: 0.0,
        }));
        cfg.episodes.n_way = 3;
        cfg.episodes.n_shot = 2;
        cfg.episodes.n_test = 3;
        cfg.episodes.n_episodes = 7;
        cfg.train.epochs = 5;
        let ds = cfg.load_dataset().unwrap();
        let run = run_fewshot(&cfg, &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_fewshot(dir.path(), &cfg, &run).unwrap();
        let back = read_episodes_csv(&dir.path().join("episodes.csv")).unwrap();
        assert_eq!(back, run.episodes);
        assert_eq!(episode_stats(&back), run.summary.stats);
    }

    #[test]
    fn rejects_foreign_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(read_episodes_csv(&p).is_err());
    }
}
