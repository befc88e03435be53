//! Interaction-influence event study: after an agent comments on a post,
//! does its own subsequent content move toward that post?

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use chrono::{DateTime, Utc};
use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{timestamp, CorpusSnapshot, DailyPartition};
use crate::csvfmt;
use crate::features::{FeatureRef, FeatureSpace, FeatureTable};
use crate::rng::{keyed_rng, label_key};
use crate::stats::{mean, Distribution};

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_SAMPLE_PROB: f64 = 0.3;

/// Agent `agent` commented on post `target` at `time`; `pre`/`post` are the
/// `w` authored posts immediately before and after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionEvent {
    /// Id of the (earliest) comment that created the event.
    pub id: String,
    pub agent: String,
    pub time: DateTime<Utc>,
    pub target: usize,
    pub pre: Vec<usize>,
    pub post: Vec<usize>,
}

/// One event per (agent, post) engagement at its earliest comment, for
/// agents with at least `w` authored posts strictly before and strictly
/// after the comment. Self-comments and comments on unknown posts never
/// produce events.
pub fn collect_events(snapshot: &CorpusSnapshot, w: usize) -> Vec<InteractionEvent> {
    let timelines = snapshot.posts_by_author();
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut events = Vec::new();
    for c in &snapshot.comments {
        if c.dangling {
            continue;
        }
        let Some(target) = snapshot.post_position(&c.post_id) else { continue };
        if snapshot.posts[target].author == c.author {
            continue;
        }
        if !seen.insert((c.author.as_str(), c.post_id.as_str())) {
            continue;
        }
        let Some(timeline) = timelines.get(c.author.as_str()) else { continue };
        let lo = timeline.partition_point(|&p| snapshot.posts[p].created_at < c.created_at);
        let hi = timeline.partition_point(|&p| snapshot.posts[p].created_at <= c.created_at);
        if w == 0 || lo < w || timeline.len() - hi < w {
            continue;
        }
        events.push(InteractionEvent {
            id: c.id.clone(),
            agent: c.author.clone(),
            time: c.created_at,
            target,
            pre: timeline[lo - w..lo].to_vec(),
            post: timeline[hi..hi + w].to_vec(),
        });
    }
    events
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceRecord {
    pub event_id: String,
    pub agent: String,
    pub target_post: String,
    pub feature_space: FeatureSpace,
    pub s_pre: f64,
    pub s_post: f64,
    /// `s_post - s_pre`.
    pub delta: f64,
    pub is_baseline: bool,
}

/// Mean cosine between the window's posts and the target vector.
pub fn window_similarity(table: &FeatureTable<'_>, window: &[usize], target: &FeatureRef<'_>) -> Option<f64> {
    if window.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for &p in window {
        sum += table.get(p)?.cosine(target)?;
    }
    Some(sum / window.len() as f64)
}

fn score_against(
    snapshot: &CorpusSnapshot,
    event: &InteractionEvent,
    table: &FeatureTable<'_>,
    target: usize,
    is_baseline: bool,
) -> Option<InfluenceRecord> {
    let v = table.get(target)?;
    let s_pre = window_similarity(table, &event.pre, &v)?;
    let s_post = window_similarity(table, &event.post, &v)?;
    Some(InfluenceRecord {
        event_id: event.id.clone(),
        agent: event.agent.clone(),
        target_post: snapshot.posts[target].id.clone(),
        feature_space: table.space(),
        s_pre,
        s_post,
        delta: s_post - s_pre,
        is_baseline,
    })
}

/// Scores an event against its actual target; `None` when the target or a
/// window post has no usable feature vector.
pub fn interaction_influence(
    snapshot: &CorpusSnapshot,
    event: &InteractionEvent,
    table: &FeatureTable<'_>,
) -> Option<InfluenceRecord> {
    score_against(snapshot, event, table, event.target, false)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineOutcome {
    pub records: Vec<InfluenceRecord>,
    /// Events drawn for a baseline sample.
    pub drawn: usize,
    /// Drawn events whose day had no eligible post.
    pub no_candidate: usize,
    /// Drawn events whose sampled post lacked features.
    pub missing_features: usize,
}

/// Same-day control targets: per event, with probability `sample_prob`, a
/// post published on the event's day that the agent neither authored nor
/// commented on that day is drawn uniformly and scored as if it were the
/// target. Draws are keyed by (seed, event id).
pub fn random_baseline(
    events: &[InteractionEvent],
    snapshot: &CorpusSnapshot,
    partition: &DailyPartition,
    table: &FeatureTable<'_>,
    sample_prob: f64,
    seed: u64,
) -> BaselineOutcome {
    let mut commented: HashMap<(&str, usize), HashSet<usize>> = HashMap::new();
    for c in &snapshot.comments {
        if let (Some(day), Some(p)) = (partition.day_index(c.day()), snapshot.post_position(&c.post_id)) {
            commented.entry((c.author.as_str(), day)).or_default().insert(p);
        }
    }
    let draws: Vec<Option<Result<usize, ()>>> = events
        .par_iter()
        .map(|e| {
            let mut rng = keyed_rng(seed, &[label_key(&e.id)]);
            if !rng.random_bool(sample_prob.clamp(0.0, 1.0)) {
                return None;
            }
            let Some(day) = partition.day_index(e.time.date_naive()) else { return Some(Err(())) };
            let touched = commented.get(&(e.agent.as_str(), day));
            let eligible: Vec<usize> = partition.posts_by_day[day]
                .iter()
                .copied()
                .filter(|&p| snapshot.posts[p].author != e.agent && touched.is_none_or(|t| !t.contains(&p)))
                .collect();
            if eligible.is_empty() {
                return Some(Err(()));
            }
            Some(Ok(eligible[rng.random_range(0..eligible.len())]))
        })
        .collect();

    let mut out = BaselineOutcome::default();
    for (e, draw) in events.iter().zip(draws) {
        match draw {
            None => {}
            Some(Err(())) => {
                out.drawn += 1;
                out.no_candidate += 1;
            }
            Some(Ok(p)) => {
                out.drawn += 1;
                match score_against(snapshot, e, table, p, true) {
                    Some(r) => out.records.push(r),
                    None => out.missing_features += 1,
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceSummary {
    pub feature_space: FeatureSpace,
    pub events: usize,
    pub scored: usize,
    pub skipped_missing: usize,
    pub baseline_drawn: usize,
    pub baseline_scored: usize,
    pub baseline_no_candidate: usize,
    pub observed: Distribution,
    pub baseline: Distribution,
    pub observed_mean: Option<f64>,
    pub baseline_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceStudy {
    pub observed: Vec<InfluenceRecord>,
    pub baseline: Vec<InfluenceRecord>,
    pub summary: InfluenceSummary,
}

pub fn influence_study(
    snapshot: &CorpusSnapshot,
    partition: &DailyPartition,
    events: &[InteractionEvent],
    table: &FeatureTable<'_>,
    sample_prob: f64,
    seed: u64,
) -> InfluenceStudy {
    let scored: Vec<Option<InfluenceRecord>> =
        events.par_iter().map(|e| interaction_influence(snapshot, e, table)).collect();
    let skipped_missing = scored.iter().filter(|r| r.is_none()).count();
    let observed: Vec<InfluenceRecord> = scored.into_iter().flatten().collect();
    let base = random_baseline(events, snapshot, partition, table, sample_prob, seed);
    let od: Vec<f64> = observed.iter().map(|r| r.delta).collect();
    let bd: Vec<f64> = base.records.iter().map(|r| r.delta).collect();
    InfluenceStudy {
        summary: InfluenceSummary {
            feature_space: table.space(),
            events: events.len(),
            scored: observed.len(),
            skipped_missing,
            baseline_drawn: base.drawn,
            baseline_scored: base.records.len(),
            baseline_no_candidate: base.no_candidate,
            observed: Distribution::of(&od),
            baseline: Distribution::of(&bd),
            observed_mean: mean(&od),
            baseline_mean: mean(&bd),
        },
        observed,
        baseline: base.records,
    }
}

pub fn write_records_csv<'a, W: Write>(
    records: impl IntoIterator<Item = &'a InfluenceRecord>,
    events: &HashMap<&str, &InteractionEvent>,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "event_id,agent,time,target_post,feature_space,kind,s_pre,s_post,delta")?;
    for r in records {
        let time = events.get(r.event_id.as_str()).map(|e| timestamp::format(&e.time)).unwrap_or_default();
        writeln!(
            w,
            "{},{},{time},{},{},{},{},{},{}",
            csvfmt::field(&r.event_id),
            csvfmt::field(&r.agent),
            csvfmt::field(&r.target_post),
            r.feature_space.as_str(),
            if r.is_baseline { "baseline" } else { "observed" },
            csvfmt::num(r.s_pre),
            csvfmt::num(r.s_post),
            csvfmt::num(r.delta)
        )?;
    }
    Ok(())
}
