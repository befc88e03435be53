//! `report`: merges module summaries, or runs every module over a raw dump.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sociometry::corpus;
use sociometry::embedding::{StoreFormat, DEFAULT_DIM};
use sociometry::pipeline::{self, PipelineConfig};
use sociometry::probing;
use sociometry::semantic::MissingPolicy;

use crate::commands::{self, SUMMARY};
use crate::output::{Staged, MANIFEST};
use crate::sections;
use crate::{CliError, Result};

const REPORT: &str = "report.json";
const SCAN_DEPTH: usize = 3;

pub fn run(dir: &Path, out: Option<&Path>, seed: u64, permutations: usize, params: Value) -> Result<()> {
    if !dir.is_dir() {
        return Err(CliError::Data(format!("{}: not a directory", dir.display())));
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| dir.join("report"));
    if dir.join("posts.jsonl").is_file() {
        full(dir, out, seed, permutations, params)
    } else {
        collected(dir, out, params)
    }
}

fn full(dir: &Path, out: PathBuf, seed: u64, permutations: usize, params: Value) -> Result<()> {
    let mut st = Staged::new(out);
    let comments = dir.join("comments.jsonl");
    let c = commands::load_corpus_files(
        &dir.join("posts.jsonl"),
        comments.is_file().then_some(comments.as_path()),
        corpus::DEFAULT_SPAM_THRESHOLD,
        corpus::DEFAULT_MAX_MALFORMED,
        &mut st,
    )?;
    let embeddings = dir.join("embeddings.mbem");
    let store = commands::load_embeddings(
        embeddings.is_file().then_some(embeddings.as_path()),
        StoreFormat::Mbem,
        DEFAULT_DIM,
        &c.snapshot,
        &mut st,
    )?;
    let config = PipelineConfig { permutations, seed, policy: MissingPolicy::Skip, ..PipelineConfig::default() };
    let p = pipeline::run(&c.snapshot, &store, &config).map_err(CliError::data)?;
    for (stage, t) in &p.timings {
        eprintln!("{stage:>10}: {:.2}s", t.as_secs_f64());
    }

    let probes_path = dir.join("probes.jsonl");
    let catalog = if probes_path.is_file() {
        commands::read_probe_file(&probes_path, &mut st)?
    } else {
        probing::generate_probes()
    };
    let responses_path = dir.join("responses.jsonl");
    let classified = if responses_path.is_file() {
        let resp = commands::read_response_file(&responses_path, &mut st)?;
        let (outcomes, unknown) = probing::classify_all(&catalog, &resp, &c.snapshot);
        let summary = probing::consensus_summary(&outcomes);
        Some((outcomes, summary, unknown))
    } else {
        None
    };

    let f = |s: &str| format!("figures/{s}/");
    let mut out = Map::new();
    let mut put = |k: &str, v: Value| {
        out.insert(k.to_string(), v);
    };
    put("macro", sections::macro_section(&p.summary, &p.macro_series, c.spam, &mut st, &f("macro"))?);
    put("lexical", sections::lexical_section(&p.lexical, &mut st, &f("lexical"))?);
    put(
        "semantic",
        sections::semantic_section(Some(&p.centroid_matrix), Some(&p.pairwise_matrix), &mut st, &f("semantic"))?,
    );
    put("density", sections::density_section(&p.density, p.density_shift.as_ref(), true, &mut st, &f("density"))?);
    put("drift", sections::drift_section(&p.drift, &p.drift_cohorts, &mut st, &f("drift"))?);
    put("feedback", sections::feedback_section(&p.feedback, &mut st, &f("feedback"))?);
    put("influence", sections::influence_section(&p.influence, &p.influence_events, &mut st, &f("influence"))?);
    let independent = sections::graph_mode(&p.graph_independent, &mut st, "figures/structure/independent/")?;
    let cumulative = sections::graph_mode(&p.graph_cumulative, &mut st, "figures/structure/cumulative/")?;
    put(
        "structure",
        json!({
            "build": sections::graph_build(p.graph_report),
            "independent": independent,
            "cumulative": cumulative,
        }),
    );
    let classified_ref = classified.as_ref().map(|(o, s, u)| (o.as_slice(), s, u.as_slice()));
    put("probing", sections::probing_section(&catalog, classified_ref, &mut st, &f("probing"))?);
    debug_assert!(sections::SECTIONS.iter().all(|s| out.contains_key(*s)));

    let report = json!({ "source": "pipeline", "sections": out });
    st.json(REPORT, &report)?;
    st.commit("report", params)
}

fn summaries(dir: &Path, depth: usize, skip: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> =
        fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            if depth < SCAN_DEPTH && !same_dir(&path, skip) {
                summaries(&path, depth + 1, skip, found)?;
            }
        } else if path.file_name().is_some_and(|n| n == SUMMARY) {
            found.push(path);
        }
    }
    Ok(())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn collected(dir: &Path, out: PathBuf, params: Value) -> Result<()> {
    let mut found = Vec::new();
    summaries(dir, 0, &out, &mut found)?;
    if found.is_empty() {
        return Err(CliError::Data(format!("{}: no module outputs found", dir.display())));
    }
    let mut st = Staged::new(out);
    let mut merged = Map::new();
    let mut sources = Vec::new();
    for path in &found {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let summary: Value = serde_json::from_str(&text).map_err(|e| CliError::io(path, e))?;
        let module = summary["module"].as_str().unwrap_or("module").to_string();
        let parent = path.parent().unwrap_or(dir);
        let rel = parent.strip_prefix(dir).unwrap_or(parent).to_string_lossy().replace('\\', "/");
        let rel = if rel.is_empty() { module.clone() } else { rel };
        st.input(&format!("{rel}/{SUMMARY}"), path)?;
        sources.push(json!({ "module": module, "dir": rel }));

        if let Some(Value::Object(secs)) = summary.get("sections") {
            for (name, value) in secs {
                match (merged.get_mut(name), value) {
                    (Some(Value::Object(have)), Value::Object(new)) => {
                        have.extend(new.iter().map(|(k, v)| (k.clone(), v.clone())));
                    }
                    _ => {
                        merged.insert(name.clone(), value.clone());
                    }
                }
            }
        }

        let mut files: Vec<PathBuf> = fs::read_dir(parent)
            .map_err(|e| CliError::io(parent, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if name == SUMMARY || name == MANIFEST || name.starts_with('.') {
                continue;
            }
            if name.ends_with(".csv") {
                let data = fs::read(&f).map_err(|e| CliError::io(&f, e))?;
                st.bytes(format!("figures/{rel}/{name}"), data);
            }
        }
    }
    let report = json!({ "source": "collected", "inputs": sources, "sections": merged });
    st.json(REPORT, &report)?;
    st.commit("report", params)
}
