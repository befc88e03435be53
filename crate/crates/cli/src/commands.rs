use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde_json::{json, Value};
use sociometry::corpus::{self, CorpusSnapshot, IngestOptions, IngestReport, SpamReport};
use sociometry::drift::{self, DriftConfig};
use sociometry::embedding::{self, EmbeddingStore, StoreFormat};
use sociometry::features::FeatureTable;
use sociometry::feedback::{self, FeedbackConfig};
use sociometry::graph::{self, GraphMode, PageRankConfig};
use sociometry::influence;
use sociometry::lexical::{self, LexicalConfig};
use sociometry::probing;
use sociometry::semantic::{self, MissingPolicy};
use sociometry::synthsoc::{self, Regime};

use crate::output::Staged;
use crate::sections;
use crate::{
    CliError, Command, CorpusArgs, EmbedArgs, Features, Format, Mode, ProbesCommand, RegimeArg, Result, SemanticMetric,
};

pub(crate) const SUMMARY: &str = "summary.json";

pub(crate) struct Corpus {
    pub snapshot: CorpusSnapshot,
    pub report: IngestReport,
    pub spam: Option<SpamReport>,
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{}: no such file", path.display())))
    }
}

pub(crate) fn load_corpus_files(
    posts: &Path,
    comments: Option<&Path>,
    spam_threshold: usize,
    max_malformed: f64,
    st: &mut Staged,
) -> Result<Corpus> {
    require(posts)?;
    if let Some(c) = comments {
        require(c)?;
    }
    if !(0.0..=1.0).contains(&max_malformed) {
        return Err(CliError::Usage(format!("--max-malformed must lie in [0, 1], got {max_malformed}")));
    }
    let opts = IngestOptions { max_malformed_fraction: max_malformed };
    let (snapshot, report) = corpus::ingest_files(posts, comments, &opts).map_err(CliError::data)?;
    st.input("posts", posts)?;
    if let Some(c) = comments {
        st.input("comments", c)?;
    }
    let (snapshot, spam) = if spam_threshold > 0 {
        let (s, r) = corpus::apply_spam_filter(&snapshot, spam_threshold);
        (s, Some(r))
    } else {
        (snapshot, None)
    };
    Ok(Corpus { snapshot, report, spam })
}

fn load_corpus(args: &CorpusArgs, st: &mut Staged) -> Result<Corpus> {
    load_corpus_files(&args.posts, args.comments.as_deref(), args.spam_threshold, args.max_malformed, st)
}

pub(crate) fn load_embeddings(
    path: Option<&Path>,
    format: StoreFormat,
    fallback_dim: usize,
    snapshot: &CorpusSnapshot,
    st: &mut Staged,
) -> Result<EmbeddingStore> {
    match path {
        Some(p) => {
            require(p)?;
            st.input("embeddings", p)?;
            embedding::load_store(p, format).map_err(|e| CliError::io(p, e))
        }
        None => embedding::fallback_store(snapshot, fallback_dim, 0).map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn load_embed(args: &EmbedArgs, snapshot: &CorpusSnapshot, st: &mut Staged) -> Result<(EmbeddingStore, MissingPolicy)> {
    let format = match args.format {
        Format::Mbem => StoreFormat::Mbem,
        Format::Csv => StoreFormat::Csv,
    };
    let store = load_embeddings(args.embeddings.as_deref(), format, args.fallback_dim, snapshot, st)?;
    let policy = if args.allow_missing { MissingPolicy::Skip } else { MissingPolicy::Fail };
    Ok((store, policy))
}

fn tables<'a>(features: &[Features], snapshot: &CorpusSnapshot, store: &'a EmbeddingStore) -> Vec<FeatureTable<'a>> {
    let mut features = features.to_vec();
    features.sort();
    features.dedup();
    features
        .into_iter()
        .map(|f| match f {
            Features::Semantic => FeatureTable::semantic(snapshot, store),
            Features::Syntactic => FeatureTable::syntactic(snapshot),
        })
        .collect()
}

pub(crate) fn summary_json(module: &str, sections: Vec<(&str, Value)>) -> Value {
    let map: serde_json::Map<String, Value> = sections.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    json!({ "module": module, "sections": map })
}

fn finish(mut st: Staged, name: &str, params: Value, sections: Vec<(&str, Value)>) -> Result<()> {
    st.json(SUMMARY, &summary_json(name, sections))?;
    st.commit(name, params)
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parameters recorded in the manifest: the subcommand's own arguments.
fn params(command: &Command) -> Value {
    let mut v = serde_json::to_value(command).unwrap_or(Value::Null);
    while let Value::Object(m) = &v {
        if m.len() != 1 {
            break;
        }
        match m.values().next() {
            Some(inner @ Value::Object(_)) => v = inner.clone(),
            _ => break,
        }
    }
    v
}

pub fn execute(command: Command) -> Result<()> {
    let params = params(&command);
    match command {
        Command::Ingest { corpus: args, out } => {
            let mut st = Staged::new(out);
            let c = load_corpus(&args, &mut st)?;
            st.write("posts.jsonl", |w| c.snapshot.write_posts(w))?;
            st.write("comments.jsonl", |w| c.snapshot.write_comments(w))?;
            st.json("ingest_report.json", &sections::ingest_report(&c.report, c.spam.unwrap_or_default()))?;
            st.commit("ingest", params)
        }
        Command::Stats { corpus: args, out } => {
            let mut st = Staged::new(out);
            let c = load_corpus(&args, &mut st)?;
            let summary = corpus::summary(&c.snapshot);
            let partition = corpus::partition_by_day(&c.snapshot);
            let series = corpus::macro_activity(&c.snapshot, &partition);
            let v = sections::macro_section(&summary, &series, c.spam, &mut st, "")?;
            finish(st, "stats", params, vec![("macro", v)])
        }
        Command::Lexical { corpus: args, n_max, min_freq, out } => {
            if n_max == 0 {
                return Err(usage("--n-max must be at least 1"));
            }
            let mut st = Staged::new(out);
            let c = load_corpus(&args, &mut st)?;
            let partition = corpus::partition_by_day(&c.snapshot);
            let config = LexicalConfig { n_max, min_global_frequency: min_freq };
            let timeline = lexical::build_timeline(&c.snapshot, &partition, config);
            let series = lexical::birth_death_series(&timeline);
            let v = sections::lexical_section(&series, &mut st, "")?;
            finish(st, "lexical", params, vec![("lexical", v)])
        }
        Command::Semantic { metric, corpus: args, embed, k, bins, out } => {
            if k == 0 || bins == 0 {
                return Err(usage("--k and --bins must be positive"));
            }
            let want = |m: SemanticMetric| metric.is_none_or(|x| x == m);
            let mut st = Staged::new(out);
            let c = load_corpus(&args, &mut st)?;
            let (store, policy) = load_embed(&embed, &c.snapshot, &mut st)?;
            let partition = corpus::partition_by_day(&c.snapshot);
            let mut secs = Vec::new();
            if want(SemanticMetric::Centroid) || want(SemanticMetric::Pairwise) {
                let centroid = if want(SemanticMetric::Centroid) {
                    let centroids =
                        semantic::daily_centroids(&c.snapshot, &partition, &store, policy).map_err(CliError::data)?;
                    Some(semantic::centroid_similarity(&centroids).map_err(CliError::data)?)
                } else {
                    None
                };
                let pairwise = if want(SemanticMetric::Pairwise) {
                    Some(
                        semantic::pairwise_similarity(&c.snapshot, &partition, &store, policy)
                            .map_err(CliError::data)?,
                    )
                } else {
                    None
                };
                secs.push(("semantic", sections::semantic_section(centroid.as_ref(), pairwise.as_ref(), &mut st, "")?));
            }
            if want(SemanticMetric::Density) || want(SemanticMetric::Jsd) {
                let density =
                    semantic::local_density(&c.snapshot, &partition, &store, k, policy).map_err(CliError::data)?;
                let shift = if want(SemanticMetric::Jsd) {
                    match semantic::density_shift(&density, bins) {
                        Ok(s) => Some(s),
                        Err(semantic::SemanticError::NotEnoughDays { .. }) => None,
                        Err(e) => return Err(CliError::data(e)),
                    }
                } else {
                    None
                };
                let write_samples = want(SemanticMetric::Density);
                secs.push((
                    "density",
                    sections::density_section(&density, shift.as_ref(), write_samples, &mut st, "")?,
                ));
            }
            finish(st, "semantic", params, secs)
        }
        Command::Drift { corpus: args, embed, min_posts, buckets, leave_one_out, out } => {
            let mut st = Staged::new(out);
            let c = load_corpus(&args, &mut st)?;
            let (store, policy) = load_embed(&embed, &c.snapshot, &mut st)?;
            let partition = corpus::partition_by_day(&c.snapshot);
            let centroids =
                semantic::daily_centroids(&c.snapshot, &partition, &store, policy).map_err(CliError::data)?;
            let config = DriftConfig { min_posts, leave_one_out };
            let result = drift::agent_drift(&c.snapshot, &store, centroids.global.as_deref(), config, policy)
                .map_err(CliError::data)?;
            let cohorts = drift::drift_by_activity(&result.records, &buckets);
            let v = sections::drift_section(&result, &cohorts, &mut st, "")?;
            finish(st, "drift", params, vec![("drift", v)])
        }
        Command::Feedback { corpus: args, embed, window, quantile, permutations, seed, features, out } => {
            let config = FeedbackConfig { window, quantile };
            config.validate().map_err(usage)?;
            let mut st = Staged::new(out);
            let c = load_corpus(&args, &mut st)?;
            let (store, _) = load_embed(&embed, &c.snapshot, &mut st)?;
            let studies = tables(&features, &c.snapshot, &store)
                .iter()
                .map(|t| feedback::feedback_study(&c.snapshot, t, config, permutations, seed))
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?;
            let v = sections::feedback_section(&studies, &mut st, "")?;
            finish(st, "feedback", params, vec![("feedback", v)])
        }
        Command::Influence { corpus: args, embed, window, sample_prob, seed, features, out } => {
            if window == 0 || !(0.0..=1.0).contains(&sample_prob) {
                return Err(usage("--window must be positive and --sample-prob must lie in [0, 1]"));
            }
            let mut st = Staged::new(out);
            let c = load_corpus(&args, &mut st)?;
            let (store, _) = load_embed(&embed, &c.snapshot, &mut st)?;
            let partition = corpus::partition_by_day(&c.snapshot);
            let events = influence::collect_events(&c.snapshot, window);
            let studies: Vec<_> = tables(&features, &c.snapshot, &store)
                .iter()
                .map(|t| influence::influence_study(&c.snapshot, &partition, &events, t, sample_prob, seed))
                .collect();
            let v = sections::influence_section(&studies, &events, &mut st, "")?;
            finish(st, "influence", params, vec![("influence", v)])
        }
        Command::Graph { corpus: args, mode, damping, tol, max_iter, topk, top_n, out } => {
            if !(0.0..1.0).contains(&damping) || damping == 0.0 || tol.is_nan() || tol <= 0.0 || max_iter == 0 {
                return Err(usage("--damping must lie in (0, 1); --tol and --max-iter must be positive"));
            }
            let mut st = Staged::new(out);
            let c = load_corpus(&args, &mut st)?;
            let partition = corpus::partition_by_day(&c.snapshot);
            let gm = match mode {
                Mode::Independent => GraphMode::Independent,
                Mode::Cumulative => GraphMode::Cumulative,
            };
            let (graphs, report) = graph::build_graphs(&c.snapshot, &partition, gm);
            let config = PageRankConfig { damping, tolerance: tol, max_iter };
            let series = graph::analyze(&graphs, config, &topk, top_n).map_err(CliError::data)?;
            let v = sections::graph_mode(&series, &mut st, "")?;
            let structure = json!({ "build": sections::graph_build(report), gm.as_str(): v });
            finish(st, "graph", params, vec![("structure", structure)])
        }
        Command::Probes { action: ProbesCommand::Generate { out } } => {
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = out.file_name().ok_or_else(|| usage("--out must name a file"))?;
            let mut st = Staged::new(dir);
            let probes = probing::generate_probes();
            st.write(name.to_string_lossy(), |w| probing::write_probes(&probes, w))?;
            st.commit("probes_generate", params)
        }
        Command::Probes { action: ProbesCommand::Classify { probes, responses, posts, comments, out } } => {
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = out.file_name().ok_or_else(|| usage("--out must name a file"))?.to_string_lossy().into_owned();
            let mut st = Staged::new(dir);
            let snapshot = match &posts {
                Some(p) => {
                    load_corpus_files(p, comments.as_deref(), 0, corpus::DEFAULT_MAX_MALFORMED, &mut st)?.snapshot
                }
                None => CorpusSnapshot::empty(),
            };
            let catalog = read_probe_file(&probes, &mut st)?;
            let resp = read_response_file(&responses, &mut st)?;
            let (outcomes, unknown) = probing::classify_all(&catalog, &resp, &snapshot);
            let summary = probing::consensus_summary(&outcomes);
            st.write(name, |w| probing::write_outcomes_csv(&outcomes, w))?;
            let v = json!({
                "catalog": sections::catalog_summary(&catalog),
                "consensus": {
                    "breakdown": summary.breakdown(),
                    "summary": &summary,
                    "unknown_probe_ids": unknown,
                },
            });
            st.json("consensus_summary.json", &v["consensus"])?;
            finish(st, "probes_classify", params, vec![("probing", v)])
        }
        Command::Simulate { regime, agents, days, seed, dim, posts_per_day, comments_per_day, noise, out } => {
            let regime = match regime {
                RegimeArg::InertTurnover => Regime::InertTurnover,
                RegimeArg::Convergent => Regime::Convergent,
                RegimeArg::FeedbackAdaptive => Regime::FeedbackAdaptive,
                RegimeArg::Hierarchical => Regime::Hierarchical,
                RegimeArg::Egalitarian => Regime::Egalitarian,
            };
            let mut config = synthsoc::preset(regime);
            if let Some(v) = agents {
                config.agents = v;
            }
            if let Some(v) = days {
                config.days = v;
            }
            if let Some(v) = seed {
                config.seed = v;
            }
            if let Some(v) = dim {
                config.dim = v;
            }
            if let Some(v) = posts_per_day {
                config.posts_per_agent_per_day = v;
            }
            if let Some(v) = comments_per_day {
                config.comments_per_agent_per_day = v;
            }
            if let Some(v) = noise {
                config.noise_sigma = v;
            }
            config.validate().map_err(usage)?;
            let society = synthsoc::generate(&config).map_err(CliError::data)?;
            let mut st = Staged::new(out);
            st.write("posts.jsonl", |w| society.write_posts(w))?;
            st.write("comments.jsonl", |w| society.write_comments(w))?;
            st.write("embeddings.mbem", |w| society.store.write_mbem(w))?;
            st.write("truth.json", |w| society.write_truth(w))?;
            st.commit("simulate", params)
        }
        Command::Report { dir, out, seed, permutations } => {
            crate::report::run(&dir, out.as_deref(), seed, permutations, params)
        }
    }
}

pub(crate) fn read_probe_file(path: &Path, st: &mut Staged) -> Result<Vec<probing::ProbePost>> {
    require(path)?;
    st.input("probes", path)?;
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    probing::read_probes(BufReader::new(f)).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_response_file(path: &Path, st: &mut Staged) -> Result<Vec<probing::ProbeResponse>> {
    require(path)?;
    st.input("responses", path)?;
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    probing::read_responses(BufReader::new(f)).map_err(|e| CliError::io(path, e))
}
