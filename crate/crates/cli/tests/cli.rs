use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn monorank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monorank")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a 30/10 query train/test split with a shared planted scorer.
fn synthetic_split(dir: &Path) {
    let out = monorank(&[
        "gen-synth",
        "--out",
        s(&dir.join("train.txt")),
        "--test-out",
        s(&dir.join("test.txt")),
        "--test-queries",
        "10",
        "--queries",
        "30",
        "--docs",
        "8",
        "--features",
        "4",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synthetic_train_writes_model_and_trace() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("run");
    let out = monorank(&[
        "train", "--out-dir", s(&out_dir), "--max-outer", "5", "--set", "synth_queries=10", "--set", "synth_docs=6",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("final objective"));
    let mut files: Vec<_> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files, ["model.json", "trace.csv"]);
}

#[test]
fn missing_train_file_fails() {
    let tmp = TempDir::new().unwrap();
    let out = monorank(&["train", "--train", s(&tmp.path().join("absent.txt")), "--out-dir", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.txt"));
}

#[test]
fn training_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    synthetic_split(tmp.path());
    let train = tmp.path().join("train.txt");
    let models: Vec<String> = ["a", "b"]
        .iter()
        .map(|name| {
            let dir = tmp.path().join(name);
            let out = monorank(&["train", "--train", s(&train), "--out-dir", s(&dir), "--max-outer", "8", "--divergence", "gi"]);
            assert!(out.status.success());
            fs::read_to_string(dir.join("model.json")).unwrap()
        })
        .collect();
    assert_eq!(models[0], models[1]);
}

#[test]
fn eval_reports_one_row_per_metric() {
    let tmp = TempDir::new().unwrap();
    synthetic_split(tmp.path());
    let run = tmp.path().join("run");
    let out = monorank(&["train", "--train", s(&tmp.path().join("train.txt")), "--out-dir", s(&run), "--max-outer", "30"]);
    assert!(out.status.success());
    for (cutoffs, rows) in [("1,3,5", 8), ("", 2)] {
        let out = monorank(&[
            "eval",
            "--model",
            s(&run.join("model.json")),
            "--test",
            s(&tmp.path().join("test.txt")),
            "--out-dir",
            s(&run),
            "--cutoffs",
            cutoffs,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read_to_string(run.join("metrics.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("metric,cutoff,value"));
        assert_eq!(lines.count(), rows);
    }
}

#[test]
fn planted_model_scores_perfectly() {
    let tmp = TempDir::new().unwrap();
    synthetic_split(tmp.path());
    let run = tmp.path().join("run");
    let out = monorank(&["train", "--train", s(&tmp.path().join("train.txt")), "--out-dir", s(&run)]);
    assert!(out.status.success());
    let out = monorank(&[
        "eval",
        "--model",
        s(&run.join("model.json")),
        "--test",
        s(&tmp.path().join("test.txt")),
        "--out-dir",
        s(&run),
        "--cutoffs",
        "5",
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(run.join("metrics.csv")).unwrap();
    let ndcg5: f64 = csv.lines().find(|l| l.starts_with("ndcg,5,")).unwrap()[7..].parse().unwrap();
    assert!(ndcg5 >= 0.99, "{ndcg5}");
}

#[test]
fn eval_rejects_wider_test_features() {
    let tmp = TempDir::new().unwrap();
    synthetic_split(tmp.path());
    let run = tmp.path().join("run");
    monorank(&["train", "--train", s(&tmp.path().join("train.txt")), "--out-dir", s(&run), "--max-outer", "2"]);
    let wide = tmp.path().join("wide.txt");
    fs::write(&wide, "1 qid:1 1:0.5 9:0.1\n0 qid:1 1:0.2\n").unwrap();
    let out = monorank(&["eval", "--model", s(&run.join("model.json")), "--test", s(&wide), "--out-dir", s(&run)]);
    assert!(!out.status.success());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    synthetic_split(tmp.path());
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# comment\ndivergence = squared\nC = 0.5\nmax_outer = 3\ntrain = {}\nout_dir = {}\n",
            s(&tmp.path().join("train.txt")),
            s(&tmp.path().join("run")),
        ),
    )
    .unwrap();
    let out = monorank(&["train", "--config", s(&cfg), "-C", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/model.json")).unwrap()).unwrap();
    assert_eq!(model["C"], 2.0);
    assert_eq!(model["divergence"]["kind"], "squared");

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert!(!monorank(&["train", "--config", s(&cfg)]).status.success());
}

#[test]
fn require_convergence_sets_exit_status() {
    let tmp = TempDir::new().unwrap();
    synthetic_split(tmp.path());
    let train = tmp.path().join("train.txt");
    let args = ["train", "--train", s(&train), "--out-dir", s(tmp.path()), "--max-outer", "1"];
    assert!(monorank(&args).status.success());
    let mut strict = args.to_vec();
    strict.push("--require-convergence");
    assert_eq!(monorank(&strict).status.code(), Some(3));
}

#[test]
fn sweep_reports_one_row_per_c() {
    let tmp = TempDir::new().unwrap();
    synthetic_split(tmp.path());
    let run = tmp.path().join("sweep");
    let out = monorank(&[
        "sweep",
        "--train",
        s(&tmp.path().join("train.txt")),
        "--vali",
        s(&tmp.path().join("test.txt")),
        "--test",
        s(&tmp.path().join("test.txt")),
        "--grid",
        "1e-5,1,10",
        "--max-outer",
        "5",
        "--out-dir",
        s(&run),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(run.join("sweep.csv")).unwrap();
    assert_eq!(report.lines().next(), Some("C,vali_map,objective,outer_iterations,converged"));
    assert_eq!(report.lines().count(), 4);
    for f in ["model.json", "trace.csv", "metrics.csv"] {
        assert!(run.join(f).is_file(), "{f}");
    }
}
