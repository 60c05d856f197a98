//! End-to-end tests driving the compiled `telfraud` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn telfraud(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_telfraud"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A linearly separable toy dataset: fraud iff minutes > 50. The caller_id
/// column exercises identifier handling end to end.
fn write_toy_csv(path: &Path, n: usize) -> PathBuf {
    let mut text = String::from("caller_id,minutes,cost,fraud\n");
    for i in 0..n {
        let minutes = (i * 7 % 100) as f64;
        let cost = (i * 13 % 40) as f64 / 4.0;
        let fraud = u8::from(minutes > 50.0);
        writeln!(text, "c{i:03},{minutes},{cost},{fraud}").unwrap();
    }
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

fn train_toy(dir: &Path) -> (PathBuf, PathBuf) {
    let input = write_toy_csv(&dir.join("toy.csv"), 80);
    let out = dir.join("run");
    let result = telfraud(&[
        "train",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--models",
        "rf,xgb",
        "--rf-trees",
        "15",
        "--xgb-rounds",
        "15",
    ]);
    assert!(result.status.success(), "train failed: {}", stderr(&result));
    (input, out)
}

#[test]
fn train_writes_artifacts_and_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = train_toy(dir.path());

    for name in [
        "rf.model",
        "rf.report.txt",
        "rf.report.json",
        "rf.roc.csv",
        "xgb.model",
        "comparison.txt",
    ] {
        assert!(out.join(name).exists(), "missing artifact {name}");
    }

    let input = dir.path().join("toy.csv");
    let printed = stdout(&telfraud(&[
        "train",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("run2").to_str().unwrap(),
        "--rf-trees",
        "15",
        "--xgb-rounds",
        "15",
    ]));
    assert!(printed.contains("model"), "no table header:\n{printed}");
    assert!(printed.contains("accuracy"), "no accuracy column:\n{printed}");
    assert!(printed.contains("rf"), "no rf row:\n{printed}");
    assert!(printed.contains("xgb"), "no xgb row:\n{printed}");
}

#[test]
fn predict_scores_every_row_with_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out) = train_toy(dir.path());
    let scored = dir.path().join("scored.csv");

    let result = telfraud(&[
        "predict",
        "--model",
        out.join("rf.model").to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        scored.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "predict failed: {}", stderr(&result));

    let text = std::fs::read_to_string(&scored).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "id,score,label");
    assert_eq!(lines.len(), 81); // header + one record per row

    // Scoring the training rows with an unlimited-depth forest should
    // reproduce the training labels almost perfectly.
    let mut wrong = 0;
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert!(fields[0].starts_with('c'), "identifier lost: {line}");
        let score: f64 = fields[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&score), "score out of range: {line}");
        let id_num: usize = fields[0][1..].parse().unwrap();
        let truth = u8::from((id_num * 7 % 100) as f64 > 50.0);
        if fields[2] != truth.to_string() {
            wrong += 1;
        }
    }
    assert!(wrong <= 1, "{wrong} of 80 training rows mislabeled");
}

#[test]
fn predict_on_a_header_only_file_writes_an_empty_record_set() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = train_toy(dir.path());
    let empty_in = dir.path().join("empty.csv");
    std::fs::write(&empty_in, "caller_id,minutes,cost,fraud\n").unwrap();
    let scored = dir.path().join("scored.csv");

    let result = telfraud(&[
        "predict",
        "--model",
        out.join("rf.model").to_str().unwrap(),
        "--input",
        empty_in.to_str().unwrap(),
        "--out",
        scored.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "predict failed: {}", stderr(&result));
    assert_eq!(
        std::fs::read_to_string(&scored).unwrap(),
        "id,score,label\n"
    );
}

#[test]
fn predict_names_a_missing_feature_column() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = train_toy(dir.path());
    let bad_in = dir.path().join("bad.csv");
    std::fs::write(&bad_in, "caller_id,minutes,fraud\nc1,10,0\n").unwrap();

    let result = telfraud(&[
        "predict",
        "--model",
        out.join("rf.model").to_str().unwrap(),
        "--input",
        bad_in.to_str().unwrap(),
        "--out",
        dir.path().join("scored.csv").to_str().unwrap(),
    ]);
    assert!(!result.status.success());
    assert!(
        stderr(&result).contains("cost"),
        "error does not name the column: {}",
        stderr(&result)
    );
}

#[test]
fn evaluate_prints_metrics_for_a_labeled_file() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out) = train_toy(dir.path());

    let result = telfraud(&[
        "evaluate",
        "--model",
        out.join("xgb.model").to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "evaluate failed: {}", stderr(&result));
    let printed = stdout(&result);
    assert!(printed.contains("confusion matrix"), "{printed}");
    assert!(printed.contains("accuracy"), "{printed}");
    assert!(printed.contains("auc"), "{printed}");
}

#[test]
fn compare_lists_one_row_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out) = train_toy(dir.path());
    let table_file = dir.path().join("table.txt");

    let result = telfraud(&[
        "compare",
        "--input",
        input.to_str().unwrap(),
        "--out",
        table_file.to_str().unwrap(),
        out.join("rf.model").to_str().unwrap(),
        out.join("xgb.model").to_str().unwrap(),
    ]);
    assert!(result.status.success(), "compare failed: {}", stderr(&result));
    let printed = stdout(&result);
    assert_eq!(printed.lines().count(), 3, "{printed}");
    assert!(printed.lines().nth(1).unwrap().starts_with("rf"), "{printed}");
    assert!(printed.lines().nth(2).unwrap().starts_with("xgb"), "{printed}");
    assert_eq!(std::fs::read_to_string(&table_file).unwrap(), printed);
}

#[test]
fn unknown_model_kind_is_rejected_at_parse_time() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_toy_csv(&dir.path().join("toy.csv"), 20);
    let result = telfraud(&[
        "train",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
        "--models",
        "rf,svm",
    ]);
    assert!(!result.status.success());
    assert!(stderr(&result).contains("svm"), "{}", stderr(&result));
}

#[test]
fn train_reports_the_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let result = telfraud(&[
        "train",
        "--input",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert!(!result.status.success());
    assert!(
        stderr(&result).contains("load"),
        "stage missing from: {}",
        stderr(&result)
    );
}
