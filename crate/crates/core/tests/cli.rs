use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topicbridge"))
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_on_the_demo_corpus_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        demo_config().to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["metrics.csv", "topics.json", "config.json"] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next(),
        Some("time_index,method,cscore,dscore,re,wall_clock_s")
    );
    // Three months, two sources, three methods: five records per method.
    assert_eq!(lines.count(), 15);
    assert!(!metrics.contains('\r'));

    // The written config reproduces the run.
    let again = dir.path().join("again");
    let out = run(&[
        "run",
        "--config",
        out_dir.join("config.json").to_str().unwrap(),
        "--output-dir",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read(again.join("metrics.csv")).unwrap(),
        metrics.as_bytes()
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--config",
        demo_config().to_str().unwrap(),
        "--methods",
        "snmf",
        "--k-d",
        "2",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["methods"], serde_json::json!(["SNMF"]));
    assert_eq!(cfg["k_d"], 2);
    assert_eq!(cfg["k_c"], 2);
    assert_eq!(cfg["start_month"], "2020-01");
}

#[test]
fn zero_common_topics_is_rejected() {
    let out = run(&[
        "run",
        "--config",
        demo_config().to_str().unwrap(),
        "--k-c",
        "0",
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("k_c must be >= 1"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn unknown_flags_and_commands_fail_with_usage() {
    for args in [&["run", "--frobnicate"][..], &["plot"][..], &[][..]] {
        let out = run(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    }
}

#[test]
fn missing_corpus_is_a_diagnostic_not_a_panic() {
    let out = run(&["run", "--corpus", "/nonexistent/corpus.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent/corpus.jsonl"));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for path in [&a, &b] {
        let out = run(&[
            "synth",
            "--months",
            "4",
            "--seed",
            "7",
            "--docs-per-month",
            "20",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes.iter().filter(|&&c| c == b'\n').count(), 4 * 2 * 20);
}

#[test]
fn compare_prints_a_table_of_means() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "compare",
        "--config",
        demo_config().to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["JointONMF", "ONMF", "SNMF", "mean_cscore"] {
        assert!(stdout.contains(name), "{stdout}");
    }
}
