//! Runs every diagnostic over one corpus and embedding store.

use std::time::{Duration, Instant};

use crate::corpus::{self, CorpusSnapshot, CorpusSummary, DailyPartition, MacroActivitySeries};
use crate::drift::{self, DriftCohortSummary, DriftConfig, DriftResult};
use crate::embedding::EmbeddingStore;
use crate::features::FeatureTable;
use crate::feedback::{self, FeedbackConfig, FeedbackStudy};
use crate::graph::{self, ConcentrationSeries, GraphBuildReport, GraphMode, PageRankConfig};
use crate::influence::{self, InfluenceStudy};
use crate::lexical::{self, BirthDeathSeries, LexicalConfig};
use crate::semantic::{self, DailyCentroids, DensityDistribution, JsdSeries, MissingPolicy, SimilarityMatrix};
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lexical: LexicalConfig,
    pub k: usize,
    pub bins: usize,
    pub drift: DriftConfig,
    pub drift_buckets: Vec<usize>,
    pub feedback: FeedbackConfig,
    pub permutations: usize,
    pub influence_window: usize,
    pub sample_prob: f64,
    pub pagerank: PageRankConfig,
    pub topk: Vec<usize>,
    pub top_n: usize,
    /// Also run feedback and influence on hashed n-gram features.
    pub syntactic: bool,
    pub policy: MissingPolicy,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lexical: LexicalConfig::default(),
            k: semantic::DEFAULT_K,
            bins: semantic::DEFAULT_BINS,
            drift: DriftConfig::default(),
            drift_buckets: vec![10, 20, 50, 100],
            feedback: FeedbackConfig::default(),
            permutations: 1,
            influence_window: influence::DEFAULT_WINDOW,
            sample_prob: influence::DEFAULT_SAMPLE_PROB,
            pagerank: PageRankConfig::default(),
            topk: graph::DEFAULT_TOPK.to_vec(),
            top_n: 10,
            syntactic: true,
            policy: MissingPolicy::Fail,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub summary: CorpusSummary,
    pub partition: DailyPartition,
    pub macro_series: MacroActivitySeries,
    pub lexical: BirthDeathSeries,
    pub centroids: DailyCentroids,
    pub centroid_matrix: SimilarityMatrix,
    pub pairwise_matrix: SimilarityMatrix,
    pub density: DensityDistribution,
    /// `None` when fewer than two days have density samples.
    pub density_shift: Option<JsdSeries>,
    pub drift: DriftResult,
    pub drift_cohorts: Vec<DriftCohortSummary>,
    pub feedback: Vec<FeedbackStudy>,
    pub influence_events: Vec<influence::InteractionEvent>,
    pub influence: Vec<InfluenceStudy>,
    pub graph_report: GraphBuildReport,
    pub graph_independent: ConcentrationSeries,
    pub graph_cumulative: ConcentrationSeries,
    /// Wall time per stage, in execution order.
    pub timings: Vec<(&'static str, Duration)>,
}

pub fn run(
    snapshot: &CorpusSnapshot,
    store: &EmbeddingStore,
    config: &PipelineConfig,
) -> Result<PipelineOutput, Error> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str| {
        let now = Instant::now();
        timings.push((name, now - clock));
        clock = now;
    };

    let summary = corpus::summary(snapshot);
    let partition = corpus::partition_by_day(snapshot);
    let macro_series = corpus::macro_activity(snapshot, &partition);
    lap("corpus");

    let timeline = lexical::build_timeline(snapshot, &partition, config.lexical);
    let lexical = lexical::birth_death_series(&timeline);
    drop(timeline);
    lap("lexical");

    let centroids = semantic::daily_centroids(snapshot, &partition, store, config.policy)?;
    let centroid_matrix = semantic::centroid_similarity(&centroids)?;
    let pairwise_matrix = semantic::pairwise_similarity(snapshot, &partition, store, config.policy)?;
    lap("semantic");
    let density = semantic::local_density(snapshot, &partition, store, config.k, config.policy)?;
    let density_shift = match semantic::density_shift(&density, config.bins) {
        Ok(s) => Some(s),
        Err(semantic::SemanticError::NotEnoughDays { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    lap("density");

    let drift = drift::agent_drift(snapshot, store, centroids.global.as_deref(), config.drift, config.policy)?;
    let drift_cohorts = drift::drift_by_activity(&drift.records, &config.drift_buckets);
    lap("drift");

    let semantic_table = FeatureTable::semantic(snapshot, store);
    let syntactic_table = config.syntactic.then(|| FeatureTable::syntactic(snapshot));
    let tables: Vec<&FeatureTable<'_>> = std::iter::once(&semantic_table).chain(syntactic_table.as_ref()).collect();
    let feedback = tables
        .iter()
        .map(|t| feedback::feedback_study(snapshot, t, config.feedback, config.permutations, config.seed))
        .collect::<Result<Vec<_>, _>>()?;
    lap("feedback");

    let events = influence::collect_events(snapshot, config.influence_window);
    let influence = tables
        .iter()
        .map(|t| influence::influence_study(snapshot, &partition, &events, t, config.sample_prob, config.seed))
        .collect();
    lap("influence");

    let (independent, graph_report) = graph::build_graphs(snapshot, &partition, GraphMode::Independent);
    let (cumulative, _) = graph::build_graphs(snapshot, &partition, GraphMode::Cumulative);
    let graph_independent = graph::analyze(&independent, config.pagerank, &config.topk, config.top_n)?;
    let graph_cumulative = graph::analyze(&cumulative, config.pagerank, &config.topk, config.top_n)?;
    lap("graph");

    Ok(PipelineOutput {
        summary,
        partition,
        macro_series,
        lexical,
        centroids,
        centroid_matrix,
        pairwise_matrix,
        density,
        density_shift,
        drift,
        drift_cohorts,
        feedback,
        influence_events: events,
        influence,
        graph_report,
        graph_independent,
        graph_cumulative,
        timings,
    })
}
