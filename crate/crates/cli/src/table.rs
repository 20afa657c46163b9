//! Plain-text tables and CSV blocks printed to stdout.

use std::fmt::Write;

use mwi::experiment::{AblationCell, Stat, StepAggregate, ThresholdPoint};
use mwi::metrics::{MetricsReport, METRIC_NAMES};

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

fn raw(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

pub fn stats(stats: &[Stat]) -> String {
    let mut out = format!(
        "{:<24} {:>8} {:>8} {:>5}\n",
        "metric", "mean", "stderr", "n"
    );
    for s in stats {
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>8} {:>5}",
            s.name,
            cell(s.mean),
            cell(s.stderr),
            s.n
        );
    }
    out
}

pub fn stats_csv(stats: &[Stat]) -> String {
    let mut out = String::from("metric,mean,stderr,n\n");
    for s in stats {
        let _ = writeln!(out, "{},{},{},{}", s.name, raw(s.mean), raw(s.stderr), s.n);
    }
    out
}

pub fn report(report: &MetricsReport) -> String {
    let mut out = format!("{:<24} {:>8}\n", "metric", "value");
    for (name, v) in METRIC_NAMES.iter().zip(report.values()) {
        let _ = writeln!(out, "{name:<24} {:>8}", cell(v));
    }
    out
}

pub fn report_csv(report: &MetricsReport) -> String {
    let values: Vec<String> = report.values().into_iter().map(raw).collect();
    format!("{}\n{}\n", METRIC_NAMES.join(","), values.join(","))
}

pub fn ablation(cells: &[AblationCell]) -> String {
    let mut out = format!(
        "{:>6} {:<14} {:<8} {:>10} {:>10} {:>10}\n",
        "epochs", "aug", "head", "overall_f1", "top1", "best_f1"
    );
    for c in cells {
        let _ = writeln!(
            out,
            "{:>6} {:<14} {:<8} {:>10} {:>10} {:>10}",
            c.epochs,
            c.aug.to_string(),
            c.head.to_string(),
            cell(c.summary.mean("overall_f1")),
            cell(c.summary.mean("top1_accuracy")),
            cell(c.summary.mean("best_f1")),
        );
    }
    out
}

pub fn continual(steps: &[StepAggregate]) -> String {
    let mean = |s: &StepAggregate, name: &str| {
        s.stats
            .iter()
            .find(|st| st.name == name)
            .and_then(|st| st.mean)
    };
    let mut out = format!(
        "{:>4} {:>9} {:>18} {:>14} {:>8}\n",
        "step", "n_visible", "fixed_threshold_f1", "best_threshold", "best_f1"
    );
    for s in steps {
        let _ = writeln!(
            out,
            "{:>4} {:>9} {:>18} {:>14} {:>8}",
            s.step,
            s.n_visible,
            cell(mean(s, "fixed_threshold_f1")),
            cell(mean(s, "best_threshold")),
            cell(mean(s, "best_f1")),
        );
    }
    out
}

pub fn sweep(points: &[ThresholdPoint]) -> String {
    let mut out = format!("{:>9} {:>10} {:>8}\n", "threshold", "overall_f1", "stderr");
    for p in points {
        let _ = writeln!(
            out,
            "{:>9.2} {:>10} {:>8}",
            p.threshold,
            cell(p.f1.mean),
            cell(p.f1.stderr)
        );
    }
    out
}
