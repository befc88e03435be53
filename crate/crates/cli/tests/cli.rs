use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sociometry(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sociometry")).current_dir(dir).args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn simulated() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let out = sociometry(
        tmp.path(),
        &["simulate", "--regime", "hierarchical", "--agents", "20", "--days", "4", "--dim", "8", "--out", "soc"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    tmp
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(sociometry(tmp.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(sociometry(tmp.path(), &["stats"]).status.code(), Some(1));
    assert_eq!(sociometry(tmp.path(), &["nonsense"]).status.code(), Some(1));
    let missing = sociometry(tmp.path(), &["stats", "--posts", "missing.jsonl", "--out", "s"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&missing.stderr).is_empty());
    assert!(!tmp.path().join("s").exists());

    fs::write(tmp.path().join("bad.jsonl"), "{not json\n{also not\n").unwrap();
    assert_eq!(sociometry(tmp.path(), &["stats", "--posts", "bad.jsonl", "--out", "s"]).status.code(), Some(2));
}

#[test]
fn full_report_has_every_section() {
    let tmp = simulated();
    let out = sociometry(tmp.path(), &["report", "--dir", "soc", "--perms", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("soc/report/report.json"));
    assert_eq!(report["source"], "pipeline");
    let sections = report["sections"].as_object().unwrap();
    for s in ["macro", "lexical", "semantic", "density", "drift", "feedback", "influence", "structure", "probing"] {
        assert!(sections.contains_key(s), "missing section {s}");
    }
    assert_eq!(sections["probing"]["catalog"]["probes"], 45);
}

#[test]
fn manifest_records_inputs_and_outputs() {
    let tmp = simulated();
    let out = sociometry(tmp.path(), &["stats", "--posts", "soc/posts.jsonl", "--out", "stats"]);
    assert_eq!(out.status.code(), Some(0));
    let m = json(&tmp.path().join("stats/manifest.json"));
    let run = &m["runs"]["stats"];
    assert_eq!(run["inputs"]["posts"]["path"], "soc/posts.jsonl");
    assert_eq!(run["inputs"]["posts"]["sha256"].as_str().unwrap().len(), 64);
    for name in run["outputs"].as_object().unwrap().keys() {
        assert!(tmp.path().join("stats").join(name).is_file(), "{name}");
    }
    let first = fs::read(tmp.path().join("stats/manifest.json")).unwrap();
    sociometry(tmp.path(), &["stats", "--posts", "soc/posts.jsonl", "--out", "stats"]);
    assert_eq!(fs::read(tmp.path().join("stats/manifest.json")).unwrap(), first);
}

#[test]
fn collected_report_merges_module_summaries() {
    let tmp = simulated();
    for args in [
        &["lexical", "--posts", "soc/posts.jsonl", "--out", "runs/lexical"][..],
        &["graph", "--posts", "soc/posts.jsonl", "--comments", "soc/comments.jsonl", "--out", "runs/graph"][..],
    ] {
        assert_eq!(sociometry(tmp.path(), args).status.code(), Some(0));
    }
    assert_eq!(sociometry(tmp.path(), &["report", "--dir", "runs"]).status.code(), Some(0));
    let report = json(&tmp.path().join("runs/report/report.json"));
    assert_eq!(report["source"], "collected");
    let sections = report["sections"].as_object().unwrap();
    assert!(sections.contains_key("lexical") && sections.contains_key("structure"));
    assert!(!sections.contains_key("drift"));
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(sociometry(empty.path(), &["report", "--dir", "."]).status.code(), Some(2));
}
