//! Module outputs: figure CSVs plus one headline-statistics section each.
//!
//! The same writers serve the per-module subcommands (files at the top of
//! their output directory) and the report (files under `figures/<section>/`).

use std::collections::{BTreeMap, HashMap};

use serde_json::{json, Value};
use sociometry::corpus::{CorpusSummary, IngestReport, MacroActivitySeries, SpamReport};
use sociometry::drift::{self, DriftCohortSummary, DriftResult};
use sociometry::feedback::{self, FeedbackStudy};
use sociometry::graph::{ConcentrationSeries, GraphBuildReport};
use sociometry::influence::{self, InfluenceStudy, InteractionEvent};
use sociometry::lexical::BirthDeathSeries;
use sociometry::probing::{self, ConsensusSummary, ProbeCategory, ProbeOutcome, ProbePost};
use sociometry::semantic::{DensityDistribution, JsdSeries, SimilarityMatrix};
use sociometry::stats::{mean, Distribution};

use crate::output::Staged;
use crate::Result;

pub const SECTIONS: [&str; 9] =
    ["macro", "lexical", "semantic", "density", "drift", "feedback", "influence", "structure", "probing"];

pub fn ingest_report(report: &IngestReport, spam: SpamReport) -> Value {
    json!({
        "post_lines": report.post_lines,
        "comment_lines": report.comment_lines,
        "malformed": report.malformed.iter().map(|m| json!({
            "stream": m.stream, "line": m.line, "reason": m.reason,
        })).collect::<Vec<_>>(),
        "dangling_dropped": report.dangling_dropped,
        "dangling_retained": report.dangling_retained,
        "spam_removed_posts": spam.removed_posts,
        "spam_removed_comments": spam.removed_comments,
    })
}

pub fn macro_section(
    summary: &CorpusSummary,
    series: &MacroActivitySeries,
    spam: Option<SpamReport>,
    st: &mut Staged,
    prefix: &str,
) -> Result<Value> {
    st.write(format!("{prefix}macro_activity.csv"), |w| series.write_csv(w))?;
    let peak = series.days.iter().max_by(|a, b| a.post_volume.cmp(&b.post_volume).then(b.day.cmp(&a.day)));
    let volumes: Vec<f64> = series.days.iter().map(|d| d.post_volume as f64).collect();
    Ok(json!({
        "corpus": summary,
        "days": series.days.len(),
        "first_day": series.days.first().map(|d| d.day.to_string()),
        "last_day": series.days.last().map(|d| d.day.to_string()),
        "peak_day": peak.map(|d| d.day.to_string()),
        "peak_post_volume": peak.map(|d| d.post_volume),
        "mean_daily_posts": mean(&volumes),
        "spam_removed_posts": spam.map(|s| s.removed_posts),
        "spam_removed_comments": spam.map(|s| s.removed_comments),
    }))
}

pub fn lexical_section(series: &BirthDeathSeries, st: &mut Staged, prefix: &str) -> Result<Value> {
    st.write(format!("{prefix}birth_death.csv"), |w| series.write_csv(w))?;
    st.write(format!("{prefix}birth_death_band.csv"), |w| series.write_band_csv(w))?;
    let mut births: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut deaths: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &series.rows {
        births.entry(r.n).or_default().extend(r.birth_rate);
        deaths.entry(r.n).or_default().extend(r.death_rate);
    }
    let per_n = |m: &BTreeMap<usize, Vec<f64>>| -> BTreeMap<String, Option<f64>> {
        m.iter().map(|(n, v)| (n.to_string(), mean(v))).collect()
    };
    let band_b: Vec<f64> = series.band.iter().filter_map(|b| b.birth_mean).collect();
    let band_d: Vec<f64> = series.band.iter().filter_map(|b| b.death_mean).collect();
    Ok(json!({
        "days": series.band.len(),
        "mean_birth_rate": mean(&band_b),
        "mean_death_rate": mean(&band_d),
        "mean_birth_rate_by_n": per_n(&births),
        "mean_death_rate_by_n": per_n(&deaths),
    }))
}

fn diagonal(m: &SimilarityMatrix) -> Vec<Option<f64>> {
    (0..m.days.len()).map(|i| m.get(i, i)).collect()
}

fn off_diagonal(m: &SimilarityMatrix) -> Vec<f64> {
    let n = m.days.len();
    (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).filter_map(|(i, j)| m.get(i, j)).collect()
}

pub fn semantic_section(
    centroid: Option<&SimilarityMatrix>,
    pairwise: Option<&SimilarityMatrix>,
    st: &mut Staged,
    prefix: &str,
) -> Result<Value> {
    let mut out = serde_json::Map::new();
    if let Some(m) = centroid {
        st.write(format!("{prefix}centroid_similarity.csv"), |w| m.write_csv(w))?;
        let cross = off_diagonal(m);
        out.insert("days".into(), json!(m.days.len()));
        out.insert("centroid_similarity_mean".into(), json!(mean(&cross)));
        out.insert("centroid_similarity_min".into(), json!(cross.iter().copied().reduce(f64::min)));
        out.insert("excluded_days".into(), json!(m.excluded.iter().map(|d| d.to_string()).collect::<Vec<_>>()));
    }
    if let Some(m) = pairwise {
        st.write(format!("{prefix}pairwise_similarity.csv"), |w| m.write_csv(w))?;
        let within: Vec<f64> = diagonal(m).into_iter().flatten().collect();
        out.insert("days".into(), json!(m.days.len()));
        out.insert("pairwise_within_day_first".into(), json!(within.first()));
        out.insert("pairwise_within_day_last".into(), json!(within.last()));
        out.insert("pairwise_within_day_mean".into(), json!(mean(&within)));
        out.insert("pairwise_cross_day_mean".into(), json!(mean(&off_diagonal(m))));
    }
    Ok(Value::Object(out))
}

pub fn density_section(
    density: &DensityDistribution,
    shift: Option<&JsdSeries>,
    write_samples: bool,
    st: &mut Staged,
    prefix: &str,
) -> Result<Value> {
    if write_samples {
        st.write(format!("{prefix}density.csv"), |w| density.write_csv(w))?;
    }
    if let Some(s) = shift {
        st.write(format!("{prefix}density_jsd.csv"), |w| s.write_csv(w))?;
    }
    let daily: Vec<f64> = density.samples.iter().flatten().filter_map(|v| mean(v)).collect();
    let all: Vec<f64> = density.samples.iter().flatten().flatten().copied().collect();
    let jsd: Vec<f64> = shift.map(|s| s.links.iter().filter_map(|l| l.jsd).collect()).unwrap_or_default();
    Ok(json!({
        "k": density.k,
        "bins": shift.map(|s| s.bins),
        "days_with_samples": daily.len(),
        "skipped_days": density.skipped.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "s_k": Distribution::of(&all),
        "daily_mean_first": daily.first(),
        "daily_mean_last": daily.last(),
        "jsd": Distribution::of(&jsd),
    }))
}

pub fn drift_section(
    result: &DriftResult,
    cohorts: &[DriftCohortSummary],
    st: &mut Staged,
    prefix: &str,
) -> Result<Value> {
    st.write(format!("{prefix}drift.csv"), |w| result.write_csv(w))?;
    st.write(format!("{prefix}drift_cohorts.csv"), |w| drift::write_cohorts_csv(cohorts, w))?;
    let col =
        |f: fn(&drift::AgentDriftRecord) -> Option<f64>| -> Vec<f64> { result.records.iter().filter_map(f).collect() };
    Ok(json!({
        "agents": result.records.len(),
        "degenerate": result.records.iter().filter(|r| r.degenerate).count(),
        "drift_magnitude": Distribution::of(&col(|r| r.drift_magnitude)),
        "consistency": Distribution::of(&col(|r| r.consistency)),
        "toward_center": Distribution::of(&col(|r| r.toward_center)),
        "cohorts": cohorts.iter().map(|c| json!({
            "cohort": c.label,
            "agents": c.agents,
            "drift_magnitude_mean": c.drift_magnitude.mean,
            "consistency_mean": c.consistency.mean,
            "toward_center_mean": c.toward_center.mean,
        })).collect::<Vec<_>>(),
    }))
}

pub fn feedback_section(studies: &[FeedbackStudy], st: &mut Staged, prefix: &str) -> Result<Value> {
    st.write(format!("{prefix}net_progress.csv"), |w| {
        studies.iter().try_for_each(|s| feedback::write_records_csv(&s.records, &mut *w))
    })?;
    let mut out = serde_json::Map::new();
    for s in studies {
        let m = &s.summary;
        out.insert(
            m.feature_space.as_str().to_string(),
            json!({
                "pairs": m.pairs,
                "degenerate": m.degenerate,
                "observed_mean": m.observed_mean,
                "baseline_mean": m.baseline_mean,
                "observed": m.observed,
                "baseline": m.baseline,
            }),
        );
    }
    Ok(Value::Object(out))
}

pub fn influence_section(
    studies: &[InfluenceStudy],
    events: &[InteractionEvent],
    st: &mut Staged,
    prefix: &str,
) -> Result<Value> {
    let by_id: HashMap<&str, &InteractionEvent> = events.iter().map(|e| (e.id.as_str(), e)).collect();
    st.write(format!("{prefix}influence.csv"), |w| {
        studies
            .iter()
            .try_for_each(|s| influence::write_records_csv(s.observed.iter().chain(&s.baseline), &by_id, &mut *w))
    })?;
    let mut out = serde_json::Map::new();
    for s in studies {
        let m = &s.summary;
        out.insert(
            m.feature_space.as_str().to_string(),
            json!({
                "events": m.events,
                "scored": m.scored,
                "skipped_missing": m.skipped_missing,
                "baseline_drawn": m.baseline_drawn,
                "baseline_scored": m.baseline_scored,
                "baseline_no_candidate": m.baseline_no_candidate,
                "observed_mean": m.observed_mean,
                "baseline_mean": m.baseline_mean,
                "observed": m.observed,
                "baseline": m.baseline,
            }),
        );
    }
    Ok(Value::Object(out))
}

/// Writes one mode's graph files and returns its summary.
pub fn graph_mode(series: &ConcentrationSeries, st: &mut Staged, prefix: &str) -> Result<Value> {
    st.write(format!("{prefix}pagerank.csv"), |w| series.write_pagerank_csv(w))?;
    st.write(format!("{prefix}topk_mass.csv"), |w| series.write_topk_csv(w))?;
    st.write(format!("{prefix}supernodes.csv"), |w| series.write_supernodes_csv(w))?;
    st.write(format!("{prefix}persistence.csv"), |w| series.write_persistence_csv(w))?;
    st.write(format!("{prefix}degrees.csv"), |w| series.write_degrees_csv(w))?;
    st.write(format!("{prefix}stats.csv"), |w| series.write_stats_csv(w))?;
    let mut topk: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for d in &series.days {
        for &(k, m) in &d.topk {
            topk.entry(k).or_default().push(m);
        }
    }
    let counts: Vec<f64> = series.days.iter().filter_map(|d| d.supernodes.as_ref().map(|s| s.k_star as f64)).collect();
    let last = series.days.last();
    Ok(json!({
        "days": series.days.len(),
        "mean_topk_mass": topk.iter().map(|(k, v)| (k.to_string(), mean(v))).collect::<BTreeMap<_, _>>(),
        "mean_supernode_count": mean(&counts),
        "mean_persistence": series.mean_persistence(),
        "final_nodes": last.map(|d| d.nodes),
        "final_edges": last.map(|d| d.edges),
        "top_in_degree": series.degrees.in_degree.first().map(|(a, w)| json!({"agent": a, "weight": w})),
        "top_out_degree": series.degrees.out_degree.first().map(|(a, w)| json!({"agent": a, "weight": w})),
    }))
}

pub fn graph_build(report: GraphBuildReport) -> Value {
    json!({
        "unresolved": report.unresolved,
        "self_loops": report.self_loops,
        "out_of_range": report.out_of_range,
    })
}

pub fn catalog_summary(probes: &[ProbePost]) -> Value {
    let mut by_category: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_submolt: BTreeMap<&str, usize> = BTreeMap::new();
    for p in probes {
        if let Some((c, _, _)) = p.parts() {
            *by_category.entry(c.as_str()).or_default() += 1;
        }
        *by_submolt.entry(p.submolt.as_str()).or_default() += 1;
    }
    for c in ProbeCategory::ALL {
        by_category.entry(c.as_str()).or_default();
    }
    json!({ "probes": probes.len(), "per_category": by_category, "per_submolt": by_submolt })
}

pub fn probing_section(
    probes: &[ProbePost],
    classified: Option<(&[ProbeOutcome], &ConsensusSummary, &[String])>,
    st: &mut Staged,
    prefix: &str,
) -> Result<Value> {
    st.write(format!("{prefix}probes.jsonl"), |w| probing::write_probes(probes, w))?;
    let consensus = match classified {
        Some((outcomes, summary, unknown)) => {
            st.write(format!("{prefix}outcomes.csv"), |w| probing::write_outcomes_csv(outcomes, w))?;
            Some(json!({
                "breakdown": summary.breakdown(),
                "summary": summary,
                "unknown_probe_ids": unknown,
            }))
        }
        None => None,
    };
    Ok(json!({ "catalog": catalog_summary(probes), "consensus": consensus }))
}
