//! End-to-end runs of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

fn gridiron(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridiron"))
        .current_dir(dir)
        .args(args)
        .env_remove("GRIDIRON_MODELS")
        .env_remove("GRIDIRON_PORT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn synthesize_train_rank_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&gridiron(d, &["synthesize", "--n", "1500", "--seed", "2", "--out", "c.jsonl"]));
    assert!(d.join("c.jsonl.truth.json").exists());

    let report = ok(&gridiron(d, &["ingest", "--data", "c.jsonl", "--report", "r.json"]));
    assert!(report.contains("records kept:    1500"));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["records_read"], 1500);

    std::fs::create_dir(d.join("models")).unwrap();
    ok(&gridiron(
        d,
        &[
            "train",
            "--data",
            "c.jsonl",
            "--model",
            "tree",
            "--max-depth",
            "3",
            "--target",
            "progress",
            "--out",
            "models/p.json",
        ],
    ));
    let metrics = ok(&gridiron(
        d,
        &["train", "--data", "c.jsonl", "--model", "lda", "--holdout", "0.25", "--out", "models/s.json"],
    ));
    assert!(metrics.contains("\"accuracy\""));

    std::fs::write(d.join("gridiron.toml"), "models = \"models\"\nseed = 3\n").unwrap();
    let situation = r#"{"team":"NE","opponent":"NYJ","half":2,"time":420,"position":62,"down":3,"togo":8}"#;
    let ranked = ok(&gridiron(d, &["rank", "--situation", situation]));
    let lines: Vec<&str> = ranked.lines().collect();
    assert_eq!(lines.len(), 25);
    assert!(lines[0].contains("ranked by Progress"));
    assert!(lines[1].starts_with("1,"));

    let by_success = ok(&gridiron(d, &["rank", "--situation", situation, "--rank-by", "success"]));
    assert!(by_success.lines().next().unwrap().contains("Success"));

    let table = ok(&gridiron(
        d,
        &["evaluate", "--data", "c.jsonl", "--models", "constant,tree", "--max-depth", "1", "--folds", "3"],
    ));
    assert!(table.starts_with("method,accuracy,precision,recall,f1\nconstant,"));

    let scored = ok(&gridiron(d, &["evaluate", "--data", "c.jsonl", "--bundle", "models/p.json"]));
    assert!(scored.starts_with("method,mae,rmse\n"));

    let preds = ok(&gridiron(d, &["predict", "--bundle", "models/p.json", "--data", "c.jsonl"]));
    assert_eq!(preds.lines().count(), 1500);
}

#[test]
fn analysis_commands_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&gridiron(d, &["synthesize", "--n", "600", "--seed", "4", "--out", "c.jsonl"]));
    let scores = ok(&gridiron(d, &["feature-scores", "--data", "c.jsonl"]));
    let mut rows = scores.lines();
    assert_eq!(rows.next(), Some("column,f_value"));
    assert!(rows.next().unwrap().starts_with("togo,"));
    assert_eq!(scores.lines().count(), 78);

    ok(&gridiron(d, &["pca", "--data", "c.jsonl", "--components", "3", "--out", "p.csv"]));
    let pca = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert!(pca.starts_with("pc1,pc2,pc3,success\n"));
    assert_eq!(pca.lines().count(), 601);

    ok(&gridiron(
        d,
        &[
            "grid-search",
            "--data",
            "c.jsonl",
            "--c-exp",
            "-1:1:2",
            "--gamma-exp",
            "-5",
            "--cap",
            "200",
            "--folds",
            "2",
            "--scale",
            "--out",
            "g.csv",
        ],
    ));
    let grid = std::fs::read_to_string(d.join("g.csv")).unwrap();
    assert!(grid.starts_with("gamma,C=2^-1,C=2^1\n2^-5,"));
}

#[test]
fn failures_exit_nonzero_with_a_reason_code() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&gridiron(d, &["synthesize", "--n", "100", "--out", "c.jsonl"]));
    let out =
        gridiron(d, &["train", "--data", "c.jsonl", "--model", "linreg", "--target", "success", "--out", "m.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[target_mismatch]"));

    std::fs::write(d.join("bad.toml"), "prot = 1\n").unwrap();
    let out = gridiron(d, &["--config", "bad.toml", "ingest", "--data", "c.jsonl"]);
    assert!(!out.status.success());

    let out = gridiron(d, &["ingest", "--data", "missing.jsonl"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[io]"));
}
