//! Agent-level drift: how far an agent's late-half centroid moved from its
//! early-half centroid, whether agents move in a shared direction, and
//! whether they move toward the society's global centroid.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::corpus::CorpusSnapshot;
use crate::csvfmt;
use crate::embedding::{cosine, norm, EmbeddingStore};
use crate::semantic::{MissingPolicy, SemanticError, DEGENERATE_NORM};
use crate::stats::Distribution;

pub const DEFAULT_MIN_POSTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriftConfig {
    pub min_posts: usize,
    /// Score consistency against the mean drift of the *other* agents.
    pub leave_one_out: bool,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig { min_posts: DEFAULT_MIN_POSTS, leave_one_out: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentDriftRecord {
    pub agent: String,
    pub post_count: usize,
    pub early_centroid: Vec<f64>,
    pub late_centroid: Vec<f64>,
    pub drift_vector: Vec<f64>,
    /// `1 - cos(early, late)`.
    pub drift_magnitude: Option<f64>,
    /// `cos(d_a, mean drift)`.
    pub consistency: Option<f64>,
    /// Change in cosine to the global centroid, late minus early.
    pub toward_center: Option<f64>,
    /// Early or late centroid has zero norm.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftResult {
    /// One record per qualifying agent, sorted by agent id.
    pub records: Vec<AgentDriftRecord>,
    /// Mean of the non-degenerate drift vectors.
    pub mean_drift: Option<Vec<f64>>,
}

fn mean_rows(store: &EmbeddingStore, rows: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; store.dim()];
    for &r in rows {
        acc.iter_mut().zip(store.row(r)).for_each(|(a, &x)| *a += f64::from(x));
    }
    let inv = 1.0 / rows.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

/// Drift metrics for every agent with at least `min_posts` embedded posts.
/// The chronological history is split into an early half of `floor(m/2)`
/// posts and a late half holding the rest.
pub fn agent_drift(
    snapshot: &CorpusSnapshot,
    store: &EmbeddingStore,
    global_centroid: Option<&[f64]>,
    config: DriftConfig,
    policy: MissingPolicy,
) -> Result<DriftResult, SemanticError> {
    let mut by_agent: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut missing = Vec::new();
    for p in &snapshot.posts {
        match store.row_of(&p.id) {
            Some(r) => by_agent.entry(p.author.as_str()).or_default().push(r),
            None => missing.push(p.id.clone()),
        }
    }
    if !missing.is_empty() && policy == MissingPolicy::Fail {
        return Err(SemanticError::MissingEmbeddings(missing));
    }

    // Phase 1: drift vectors.
    let mut records: Vec<AgentDriftRecord> = by_agent
        .into_iter()
        .filter(|(_, rows)| rows.len() >= config.min_posts.max(2))
        .map(|(agent, rows)| {
            let half = rows.len() / 2;
            let early = mean_rows(store, &rows[..half]);
            let late = mean_rows(store, &rows[half..]);
            let degenerate = norm(&early) < DEGENERATE_NORM || norm(&late) < DEGENERATE_NORM;
            let drift_vector: Vec<f64> = late.iter().zip(&early).map(|(l, e)| l - e).collect();
            let drift_magnitude = if degenerate { None } else { cosine(&early, &late).ok().map(|c| 1.0 - c) };
            let toward_center = match global_centroid {
                Some(g) if !degenerate => match (cosine(&late, g), cosine(&early, g)) {
                    (Ok(l), Ok(e)) => Some(l - e),
                    _ => None,
                },
                _ => None,
            };
            AgentDriftRecord {
                agent: agent.to_string(),
                post_count: rows.len(),
                early_centroid: early,
                late_centroid: late,
                drift_vector,
                drift_magnitude,
                consistency: None,
                toward_center,
                degenerate,
            }
        })
        .collect();

    // Phase 2: alignment with the mean drift direction.
    let valid: Vec<usize> = (0..records.len()).filter(|&i| !records[i].degenerate).collect();
    let dim = store.dim();
    let mut sum = vec![0.0; dim];
    for &i in &valid {
        sum.iter_mut().zip(&records[i].drift_vector).for_each(|(s, d)| *s += d);
    }
    let mean_drift = (!valid.is_empty()).then(|| sum.iter().map(|s| s / valid.len() as f64).collect::<Vec<_>>());
    if let Some(mean) = &mean_drift {
        for &i in &valid {
            let reference: Vec<f64> = if config.leave_one_out {
                if valid.len() < 2 {
                    continue;
                }
                let m = (valid.len() - 1) as f64;
                sum.iter().zip(&records[i].drift_vector).map(|(s, d)| (s - d) / m).collect()
            } else {
                mean.clone()
            };
            records[i].consistency = cosine(&records[i].drift_vector, &reference).ok();
        }
    }
    Ok(DriftResult { records, mean_drift })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftCohortSummary {
    pub label: String,
    pub lower: usize,
    pub upper: Option<usize>,
    pub agents: usize,
    pub drift_magnitude: Distribution,
    pub consistency: Distribution,
    pub toward_center: Distribution,
}

/// Buckets agents by post count into half-open ranges
/// `[e0, e1), [e1, e2), ..., [e_last, inf)`. A leading `[0, e0)` bucket is
/// added only when some agent falls below the first edge.
pub fn drift_by_activity(records: &[AgentDriftRecord], bucket_edges: &[usize]) -> Vec<DriftCohortSummary> {
    let mut edges: Vec<usize> = bucket_edges.to_vec();
    edges.sort_unstable();
    edges.dedup();
    if edges.is_empty() {
        edges.push(0);
    }
    if edges[0] > 0 && records.iter().any(|r| r.post_count < edges[0]) {
        edges.insert(0, 0);
    }
    (0..edges.len())
        .map(|b| {
            let lower = edges[b];
            let upper = edges.get(b + 1).copied();
            let members: Vec<&AgentDriftRecord> =
                records.iter().filter(|r| r.post_count >= lower && upper.is_none_or(|u| r.post_count < u)).collect();
            let collect =
                |f: fn(&AgentDriftRecord) -> Option<f64>| -> Vec<f64> { members.iter().filter_map(|r| f(r)).collect() };
            DriftCohortSummary {
                label: match upper {
                    Some(u) => format!("[{lower},{u})"),
                    None => format!("[{lower},inf)"),
                },
                lower,
                upper,
                agents: members.len(),
                drift_magnitude: Distribution::of(&collect(|r| r.drift_magnitude)),
                consistency: Distribution::of(&collect(|r| r.consistency)),
                toward_center: Distribution::of(&collect(|r| r.toward_center)),
            }
        })
        .collect()
}

impl DriftResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "agent,post_count,drift_magnitude,consistency,toward_center,degenerate")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                csvfmt::field(&r.agent),
                r.post_count,
                csvfmt::opt(r.drift_magnitude),
                csvfmt::opt(r.consistency),
                csvfmt::opt(r.toward_center),
                r.degenerate
            )?;
        }
        Ok(())
    }
}

pub fn write_cohorts_csv<W: Write>(cohorts: &[DriftCohortSummary], mut w: W) -> io::Result<()> {
    writeln!(w, "cohort,metric,count,mean,q05,q25,q50,q75,q95")?;
    for c in cohorts {
        for (name, d) in [
            ("drift_magnitude", &c.drift_magnitude),
            ("consistency", &c.consistency),
            ("toward_center", &c.toward_center),
        ] {
            writeln!(
                w,
                "{},{name},{},{},{},{},{},{},{}",
                c.label,
                d.count,
                csvfmt::opt(d.mean),
                csvfmt::opt(d.q05),
                csvfmt::opt(d.q25),
                csvfmt::opt(d.q50),
                csvfmt::opt(d.q75),
                csvfmt::opt(d.q95)
            )?;
        }
    }
    Ok(())
}
