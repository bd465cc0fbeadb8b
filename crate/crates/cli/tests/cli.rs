use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lyrics-eval"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "clean",
        "stats",
        "metrics",
        "featurize",
        "mauve",
        "fid",
        "sample",
        "agreement",
        "aggregate",
        "report",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn missing_input_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["metrics", "--in", "no-such-corpus.jsonl", "--out"])
        .arg(dir.path().join("m.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let last = stderr(&out).lines().last().unwrap().to_string();
    let record: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!(record["kind"], "io");
    assert_eq!(record["path"], "no-such-corpus.jsonl");
}

#[test]
fn unknown_flag_prints_usage_and_exits_1() {
    let out = bin().args(["stats", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage:"));
}

#[test]
fn validation_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("sample")
        .arg("--train")
        .arg(fixture("classical_train.jsonl"))
        .args(["--p", "1.5", "--out"])
        .arg(dir.path().join("s.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let record: serde_json::Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(record["kind"], "invalid-argument");
}

#[test]
fn sample_writes_corpus_jsonl_with_source_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("gen.jsonl");
    let out = bin()
        .arg("sample")
        .arg("--train")
        .arg(fixture("classical_train.jsonl"))
        .args(["--p", "0.9", "--n", "5", "--max-tokens", "20", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["source"], "generated-p0.9");
        assert!(v["text"].as_str().unwrap().chars().count() <= 20);
    }
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("gen.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["subcommand"], "sample");
    assert_eq!(manifest["config"]["seed"], 0);
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 1);
}

#[test]
fn report_emits_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("report.json");
    let out = bin()
        .arg("report")
        .arg("--train")
        .arg(fixture("classical_train.jsonl"))
        .args([
            "--ps",
            "0.8,0.99",
            "--n",
            "30",
            "--kmeans-seeds",
            "1",
            "--out",
        ])
        .arg(&json_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    let header: Vec<&str> = lines[0].split_whitespace().collect();
    assert_eq!(
        header,
        [
            "rep-2",
            "rep-3",
            "rep-4",
            "diversity",
            "distinct-2",
            "mauve"
        ]
    );
    assert!(lines[1].starts_with("human"));
    assert!(lines[2].starts_with("p=0.80"));
    assert!(lines[3].starts_with("p=0.99"));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["mauve"].is_null());
    assert!(rows[1]["mauve"].as_f64().unwrap() > 0.0);
}

#[test]
fn mauve_accepts_feature_files_and_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("held.csv");
    let status = bin()
        .arg("featurize")
        .arg("--in")
        .arg(fixture("classical_heldout.jsonl"))
        .arg("--out")
        .arg(&features)
        .status()
        .unwrap();
    assert!(status.success());
    let run = |p: &Path, out: &Path| {
        let o = bin()
            .arg("mauve")
            .arg("--p")
            .arg(p)
            .arg("--q")
            .arg(fixture("classical_train.jsonl"))
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
        v["score"].as_f64().unwrap()
    };
    let from_features = run(&features, &dir.path().join("a.json"));
    let from_corpus = run(
        &fixture("classical_heldout.jsonl"),
        &dir.path().join("b.json"),
    );
    assert_eq!(from_features, from_corpus);
    assert!(from_features > 0.0 && from_features <= 1.0);
}

#[test]
fn clean_uses_custom_rules_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.jsonl");
    std::fs::write(
        &input,
        "{\"id\":\"a\",\"text\":\"<p>keep</p><p>DROP ME</p>\"}\n",
    )
    .unwrap();
    let rules = dir.path().join("custom.rules");
    std::fs::write(&rules, "[patterns]\nDROP ME\n").unwrap();
    let out_path = dir.path().join("clean.jsonl");
    let out = bin()
        .arg("clean")
        .arg("--in")
        .arg(&input)
        .arg("--rules")
        .arg(&rules)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&out_path).unwrap().trim()).unwrap();
    assert_eq!(v["text"], "keep");
}
