use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mwi::imprint::{save_classifier, Head, ImprintClassifier};

fn mwi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mwi(args);
    assert!(
        out.status.success(),
        "mwi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    mwi(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small single-label dataset on disk.
fn dataset(dir: &Path) -> PathBuf {
    let path = dir.join("d.mwie");
    ok(&[
        "synth",
        "--dim",
        "32",
        "--labels",
        "6",
        "--per-label",
        "10",
        "--data-seed",
        "3",
        "--out",
        s(&path),
    ]);
    path
}

const SMALL: [&str; 10] = [
    "--ways",
    "3",
    "--shots",
    "2",
    "--test-per-class",
    "4",
    "--episodes",
    "6",
    "--epochs",
    "8",
];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter()
        .chain(SMALL.iter())
        .chain(tail)
        .copied()
        .collect()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn synth_then_validate_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let report = ok(&["validate", s(&data)]);
    assert!(
        report.contains("60 records") && report.ends_with("0 errors\n"),
        "{report}"
    );

    let json: serde_json::Value = serde_json::from_str(&ok(&["export-json", s(&data)])).unwrap();
    assert_eq!(json["dim"], 32);
    assert_eq!(json["label_vocab"].as_array().unwrap().len(), 6);
    assert_eq!(json["records"].as_array().unwrap().len(), 60);
}

/// Builds a `.mwie` byte by byte with one vector of norm 2.
#[test]
fn validate_rejects_non_unit_vectors() {
    let mut bytes = b"MWIE".to_vec();
    bytes.extend(1u16.to_le_bytes());
    bytes.extend(2u32.to_le_bytes());
    bytes.extend(1u32.to_le_bytes());
    bytes.extend(2u64.to_le_bytes());
    bytes.extend(1u16.to_le_bytes());
    bytes.extend(b"a");
    for (id, v) in [(0u64, [1.0f32, 0.0]), (1, [0.0, 2.0])] {
        bytes.extend(id.to_le_bytes());
        bytes.extend(id.to_le_bytes());
        bytes.extend(1u16.to_le_bytes());
        bytes.extend(0u32.to_le_bytes());
        for x in v {
            bytes.extend(x.to_le_bytes());
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.mwie");
    fs::write(&path, bytes).unwrap();
    let out = mwi(&["validate", s(&path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 errors"));
}

#[test]
fn fewshot_writes_a_run_directory_that_reaggregates() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let run = dir.path().join("run");
    ok(&with(&["fewshot", "--data", s(&data)], &["--out", s(&run)]));
    for f in ["config.json", "episodes.csv", "summary.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let episodes = csv_rows(&run.join("episodes.csv"));
    assert_eq!(episodes.len(), 7);
    let config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["episodes"]["n_way"], 3);

    // The mean column of summary.csv is the arithmetic mean of the episode rows.
    let summary = csv_rows(&run.join("summary.csv"));
    let col = |name: &str| episodes[0].iter().position(|h| h == name).unwrap();
    let f1: Vec<f64> = episodes[1..]
        .iter()
        .map(|r| r[col("overall_f1")].parse().unwrap())
        .collect();
    let row = summary.iter().find(|r| r[0] == "overall_f1").unwrap();
    let mean: f64 = row[1].parse().unwrap();
    assert!((mean - f1.iter().sum::<f64>() / f1.len() as f64).abs() < 1e-12);

    // `metrics --episodes-csv` reproduces summary.csv exactly.
    let again = ok(&["metrics", "--episodes-csv", s(&run.join("episodes.csv"))]);
    let csv_block = again.split("\n\n").next().unwrap();
    assert_eq!(
        format!("{csv_block}\n"),
        fs::read_to_string(run.join("summary.csv")).unwrap()
    );
}

#[test]
fn runs_are_byte_identical_across_repeats_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let mut outputs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let run = dir.path().join(name);
        ok(&with(
            &["fewshot", "--data", s(&data)],
            &["--jobs", jobs, "--out", s(&run)],
        ));
        outputs.push((
            fs::read(run.join("episodes.csv")).unwrap(),
            fs::read(run.join("summary.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn inputs_are_never_modified() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let before = fs::read(&data).unwrap();
    ok(&with(&["fewshot", "--data", s(&data)], &[]));
    ok(&with(&["continual", "--data", s(&data)], &[]));
    assert_eq!(fs::read(&data).unwrap(), before);
}

#[test]
fn ablation_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let run = dir.path().join("ablate");
    ok(&with(
        &["ablate", "--data", s(&data)],
        &[
            "--epochs-axis",
            "0,5",
            "--heads",
            "sigmoid,softmax",
            "--out",
            s(&run),
        ],
    ));
    let rows = csv_rows(&run.join("ablation.csv"));
    assert_eq!(rows.len(), 1 + 4);
    assert_eq!(rows[0][..4], ["epochs", "aug", "head", "n_episodes"]);
}

#[test]
fn continual_writes_a_trace_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let run = dir.path().join("cl");
    ok(&with(
        &["continual", "--data", s(&data)],
        &["--out", s(&run)],
    ));
    let traces: Vec<_> = fs::read_dir(run.join("continual")).unwrap().collect();
    assert_eq!(traces.len(), 6);
    let trace = csv_rows(&run.join("continual").join("episode_0000.csv"));
    assert_eq!(trace.len(), 1 + 3);
    assert_eq!(trace[0][..2], ["step", "n_visible"]);
    assert_eq!(
        trace[0][trace[0].len() - 3..],
        ["fixed_threshold_f1", "best_threshold", "best_f1"]
    );
    assert_eq!(csv_rows(&run.join("continual_summary.csv")).len(), 1 + 3);
}

#[test]
fn sweep_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let run = dir.path().join("sweep");
    ok(&with(
        &["sweep-threshold", "--data", s(&data)],
        &["--grid-step", "0.1", "--out", s(&run)],
    ));
    let rows = csv_rows(&run.join("thresholds.csv"));
    assert_eq!(rows.len(), 1 + 9);
    assert_eq!(rows[1][0], "0.1");
}

#[test]
fn metrics_scores_a_json_batch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.json");
    fs::write(
        &path,
        r#"{"truth": [[1,0],[1,1]], "scores": [[0.8,0.3],[0.6,0.4]]}"#,
    )
    .unwrap();
    let out = ok(&["metrics", s(&path)]);
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    let get = |name: &str| values[header.iter().position(|h| *h == name).unwrap()];
    // Predictions {0}, {0} against truth {0}, {0,1}.
    assert_eq!(get("overall_f1"), "0.8");
    assert_eq!(get("subset_accuracy"), "0.5");
    assert_eq!(get("top1_accuracy"), "NA");
    assert!(out.contains("overall_f1"));
}

#[test]
fn export_json_reads_classifiers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.mwic");
    let a = [1.0f32, 0.0];
    let b = [0.0f32, 1.0];
    let clf = ImprintClassifier::imprint(
        2,
        Head::Softmax,
        0.4,
        vec![("a", vec![&a[..]]), ("b", vec![&b[..]])],
    )
    .unwrap();
    save_classifier(&clf, &path).unwrap();
    let json: serde_json::Value = serde_json::from_str(&ok(&["export-json", s(&path)])).unwrap();
    assert_eq!(json["class_names"], serde_json::json!(["a", "b"]));
    assert_eq!(json["columns"], serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));
    assert_eq!(json["threshold"], 0.4);
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let d = s(&data);
    assert_eq!(
        code(&with(&["fewshot", "--data", d], &["--threshold", "1.5"])),
        2
    );
    assert_eq!(code(&with(&["fewshot", "--data", d], &["--jobs", "0"])), 2);
    assert_eq!(
        code(&with(
            &["ablate", "--data", d],
            &["--aug-axis", "sometimes"]
        )),
        2
    );
    assert_eq!(code(&["fewshot", "--no-such-flag"]), 2);
    assert_eq!(
        code(&[
            "synth",
            "--labels",
            "0",
            "--out",
            s(&dir.path().join("x.mwie"))
        ]),
        2
    );

    assert_eq!(
        code(&["fewshot", "--data", s(&dir.path().join("missing.mwie"))]),
        3
    );
    assert_eq!(
        code(&["fewshot", "--data", d, "--ways", "7", "--episodes", "2"]),
        3
    );
    let corrupt = dir.path().join("corrupt.mwie");
    fs::write(&corrupt, b"NOPE\x01\x00").unwrap();
    assert_eq!(code(&["validate", s(&corrupt)]), 3);
    assert_eq!(code(&["export-json", s(&corrupt)]), 3);

    let out = mwi(&["fewshot", "--data", s(&dir.path().join("missing.mwie"))]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.mwie"));
}
