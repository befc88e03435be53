//! Feedback-adaptation event study.
//!
//! Each agent's chronological posts are cut into adjacent non-overlapping
//! windows of `w` posts. For every window pair `(W_k, W_{k+1})` the top and
//! bottom scored posts of `W_k` define two reference centroids, and Net
//! Progress measures whether the next window moved toward the former and
//! away from the latter. A permutation baseline reshuffles the scores inside
//! `W_k` and recomputes the same quantity.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::CorpusSnapshot;
use crate::csvfmt;
use crate::embedding::{cosine, norm};
use crate::features::{FeatureRef, FeatureSpace, FeatureTable};
use crate::rng::{keyed_rng, label_key};
use crate::semantic::DEGENERATE_NORM;
use crate::stats::{mean, Distribution};

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_QUANTILE: f64 = 0.3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeedbackError {
    #[error("window size must be at least 4, got {0}")]
    WindowTooSmall(usize),
    #[error("quantile must lie in (0, 0.5], got {0}")]
    BadQuantile(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig {
    pub window: usize,
    pub quantile: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig { window: DEFAULT_WINDOW, quantile: DEFAULT_QUANTILE }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.window < 4 {
            return Err(FeedbackError::WindowTooSmall(self.window));
        }
        if !(self.quantile > 0.0 && self.quantile <= 0.5) {
            return Err(FeedbackError::BadQuantile(self.quantile));
        }
        Ok(())
    }

    /// Size of the top and bottom sets: `max(1, floor(quantile * w))`.
    pub fn set_size(&self) -> usize {
        ((self.quantile * self.window as f64).floor() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackWindowPair {
    pub agent: String,
    pub window_index: usize,
    /// Post positions of `W_k`, chronological.
    pub current: Vec<usize>,
    /// Post positions of `W_{k+1}`, chronological.
    pub next: Vec<usize>,
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
}

/// Ranks `posts` by score (descending), then timestamp, then id, and
/// returns the window-local indices of the first and last `size`.
fn split_by_score(snapshot: &CorpusSnapshot, posts: &[usize], scores: &[i64], size: usize) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..posts.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&snapshot.posts[posts[a]], &snapshot.posts[posts[b]]);
        scores[b].cmp(&scores[a]).then_with(|| pa.created_at.cmp(&pb.created_at)).then_with(|| pa.id.cmp(&pb.id))
    });
    let top = order[..size].to_vec();
    let bottom = order[order.len() - size..].to_vec();
    (top, bottom)
}

/// Window pairs over one agent's chronological timeline. The trailing
/// partial window is dropped; fewer than `2w` posts yields no pairs.
pub fn build_windows(
    snapshot: &CorpusSnapshot,
    agent: &str,
    timeline: &[usize],
    config: FeedbackConfig,
) -> Result<Vec<FeedbackWindowPair>, FeedbackError> {
    config.validate()?;
    let w = config.window;
    let windows: Vec<&[usize]> = timeline.chunks_exact(w).collect();
    let size = config.set_size();
    Ok(windows
        .windows(2)
        .enumerate()
        .map(|(k, pair)| {
            let scores: Vec<i64> = pair[0].iter().map(|&p| snapshot.posts[p].score).collect();
            let (top, bottom) = split_by_score(snapshot, pair[0], &scores, size);
            FeedbackWindowPair {
                agent: agent.to_string(),
                window_index: k,
                current: pair[0].to_vec(),
                next: pair[1].to_vec(),
                top: top.iter().map(|&i| pair[0][i]).collect(),
                bottom: bottom.iter().map(|&i| pair[0][i]).collect(),
            }
        })
        .collect())
}

fn centroid_checked(table: &FeatureTable<'_>, posts: &[usize]) -> Option<Vec<f64>> {
    table.centroid(posts).filter(|c| norm(c) >= DEGENERATE_NORM)
}

/// `(delta_top, delta_bot)` for the given reference sets, computed from
/// explicit centroids.
pub fn deltas(
    table: &FeatureTable<'_>,
    current: &[usize],
    next: &[usize],
    top: &[usize],
    bottom: &[usize],
) -> Option<(f64, f64)> {
    let c_curr = centroid_checked(table, current)?;
    let c_next = centroid_checked(table, next)?;
    let c_top = centroid_checked(table, top)?;
    let c_bot = centroid_checked(table, bottom)?;
    let dist = |a: &[f64], b: &[f64]| cosine(a, b).ok().map(|c| 1.0 - c);
    let delta_top = dist(&c_next, &c_top)? - dist(&c_curr, &c_top)?;
    let delta_bot = dist(&c_next, &c_bot)? - dist(&c_curr, &c_bot)?;
    Some((delta_top, delta_bot))
}

/// Dot products among one window pair's posts. Any top/bottom split of
/// `W_k` can then be scored in `O(w^2)` without touching the vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowGeometry {
    w: usize,
    /// `v_i . v_j` over the current window, row-major.
    gram: Vec<f64>,
    /// `v_i . c_next`.
    to_next: Vec<f64>,
    /// `v_i . c_curr`.
    to_curr: Vec<f64>,
    next_norm: f64,
    curr_norm: f64,
}

impl WindowGeometry {
    pub fn new(table: &FeatureTable<'_>, current: &[usize], next: &[usize]) -> Option<Self> {
        let cur: Vec<FeatureRef<'_>> = current.iter().map(|&p| table.get(p)).collect::<Option<_>>()?;
        let nxt: Vec<FeatureRef<'_>> = next.iter().map(|&p| table.get(p)).collect::<Option<_>>()?;
        let w = cur.len();
        if w == 0 || nxt.is_empty() {
            return None;
        }
        let mut gram = vec![0.0; w * w];
        for i in 0..w {
            for j in i..w {
                let d = cur[i].dot(&cur[j]);
                gram[i * w + j] = d;
                gram[j * w + i] = d;
            }
        }
        let inv_n = 1.0 / nxt.len() as f64;
        let to_next: Vec<f64> = cur.iter().map(|v| nxt.iter().map(|u| v.dot(u)).sum::<f64>() * inv_n).collect();
        let to_curr: Vec<f64> = (0..w).map(|i| gram[i * w..(i + 1) * w].iter().sum::<f64>() / w as f64).collect();
        let mut next_sq = 0.0;
        for i in 0..nxt.len() {
            next_sq += nxt[i].dot(&nxt[i]);
            for j in i + 1..nxt.len() {
                next_sq += 2.0 * nxt[i].dot(&nxt[j]);
            }
        }
        let next_norm = next_sq.max(0.0).sqrt() * inv_n;
        let curr_norm = (to_curr.iter().sum::<f64>() / w as f64).max(0.0).sqrt();
        (next_norm >= DEGENERATE_NORM && curr_norm >= DEGENERATE_NORM).then_some(WindowGeometry {
            w,
            gram,
            to_next,
            to_curr,
            next_norm,
            curr_norm,
        })
    }

    /// Same quantity as [`deltas`], with `top`/`bottom` given as indices
    /// into the current window.
    pub fn deltas(&self, top: &[usize], bottom: &[usize]) -> Option<(f64, f64)> {
        let set = |s: &[usize]| -> Option<(f64, f64)> {
            let m = s.len() as f64;
            let mut sq = 0.0;
            for &i in s {
                for &j in s {
                    sq += self.gram[i * self.w + j];
                }
            }
            let n = sq.max(0.0).sqrt() / m;
            if n < DEGENERATE_NORM {
                return None;
            }
            let cos_next =
                (s.iter().map(|&i| self.to_next[i]).sum::<f64>() / m / (n * self.next_norm)).clamp(-1.0, 1.0);
            let cos_curr =
                (s.iter().map(|&i| self.to_curr[i]).sum::<f64>() / m / (n * self.curr_norm)).clamp(-1.0, 1.0);
            // dist(next) - dist(curr) = cos(curr) - cos(next)
            Some((cos_next, cos_curr))
        };
        let (tn, tc) = set(top)?;
        let (bn, bc) = set(bottom)?;
        Some((tc - tn, bc - bn))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetProgressRecord {
    pub agent: String,
    pub window_index: usize,
    pub feature_space: FeatureSpace,
    pub delta_top: Option<f64>,
    pub delta_bot: Option<f64>,
    /// `delta_bot - delta_top`; `None` when any centroid is degenerate.
    pub net_progress: Option<f64>,
    /// Net Progress of each permutation run (degenerate runs omitted).
    pub baseline_np: Vec<f64>,
}

impl NetProgressRecord {
    pub fn is_degenerate(&self) -> bool {
        self.net_progress.is_none()
    }
}

fn local(window: &[usize], posts: &[usize]) -> Vec<usize> {
    posts.iter().map(|p| window.iter().position(|q| q == p).expect("post outside window")).collect()
}

pub fn net_progress(pair: &FeedbackWindowPair, table: &FeatureTable<'_>) -> NetProgressRecord {
    let d = WindowGeometry::new(table, &pair.current, &pair.next)
        .and_then(|g| g.deltas(&local(&pair.current, &pair.top), &local(&pair.current, &pair.bottom)));
    NetProgressRecord {
        agent: pair.agent.clone(),
        window_index: pair.window_index,
        feature_space: table.space(),
        delta_top: d.map(|x| x.0),
        delta_bot: d.map(|x| x.1),
        net_progress: d.map(|(top, bot)| bot - top),
        baseline_np: Vec::new(),
    }
}

/// Net Progress after shuffling the scores inside `W_k`, once per run.
/// Each run draws from a stream keyed by (seed, agent, window, run).
pub fn permutation_baseline(
    snapshot: &CorpusSnapshot,
    pair: &FeedbackWindowPair,
    table: &FeatureTable<'_>,
    config: FeedbackConfig,
    n_perms: usize,
    seed: u64,
) -> Vec<f64> {
    let Some(geometry) = WindowGeometry::new(table, &pair.current, &pair.next) else { return Vec::new() };
    let size = config.set_size();
    let scores: Vec<i64> = pair.current.iter().map(|&p| snapshot.posts[p].score).collect();
    let agent_key = label_key(&pair.agent);
    (0..n_perms)
        .filter_map(|run| {
            let mut rng = keyed_rng(seed, &[agent_key, pair.window_index as u64, run as u64]);
            let mut shuffled = scores.clone();
            shuffled.shuffle(&mut rng);
            let (top, bottom) = split_by_score(snapshot, &pair.current, &shuffled, size);
            geometry.deltas(&top, &bottom).map(|(t, b)| b - t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSummary {
    pub feature_space: FeatureSpace,
    pub pairs: usize,
    pub degenerate: usize,
    pub observed: Distribution,
    pub baseline: Distribution,
    pub observed_mean: Option<f64>,
    pub baseline_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackStudy {
    pub records: Vec<NetProgressRecord>,
    pub summary: FeedbackSummary,
}

/// Runs the study for every agent (sorted by id) in one feature space.
pub fn feedback_study(
    snapshot: &CorpusSnapshot,
    table: &FeatureTable<'_>,
    config: FeedbackConfig,
    n_perms: usize,
    seed: u64,
) -> Result<FeedbackStudy, FeedbackError> {
    config.validate()?;
    let by_agent: BTreeMap<&str, Vec<usize>> = snapshot.posts_by_author().into_iter().collect();
    let mut pairs = Vec::new();
    for (agent, timeline) in &by_agent {
        pairs.extend(build_windows(snapshot, agent, timeline, config)?);
    }
    let records: Vec<NetProgressRecord> = pairs
        .par_iter()
        .map(|pair| {
            let mut rec = net_progress(pair, table);
            if !rec.is_degenerate() {
                rec.baseline_np = permutation_baseline(snapshot, pair, table, config, n_perms, seed);
            }
            rec
        })
        .collect();
    let observed: Vec<f64> = records.iter().filter_map(|r| r.net_progress).collect();
    let baseline: Vec<f64> = records.iter().flat_map(|r| r.baseline_np.iter().copied()).collect();
    let summary = FeedbackSummary {
        feature_space: table.space(),
        pairs: records.len(),
        degenerate: records.len() - observed.len(),
        observed: Distribution::of(&observed),
        baseline: Distribution::of(&baseline),
        observed_mean: mean(&observed),
        baseline_mean: mean(&baseline),
    };
    Ok(FeedbackStudy { records, summary })
}

pub fn write_records_csv<W: Write>(records: &[NetProgressRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "agent,window_index,feature_space,kind,run,delta_top,delta_bot,net_progress")?;
    for r in records {
        let agent = csvfmt::field(&r.agent);
        let space = r.feature_space.as_str();
        writeln!(
            w,
            "{agent},{},{space},observed,,{},{},{}",
            r.window_index,
            csvfmt::opt(r.delta_top),
            csvfmt::opt(r.delta_bot),
            csvfmt::opt(r.net_progress)
        )?;
        for (run, np) in r.baseline_np.iter().enumerate() {
            writeln!(w, "{agent},{},{space},permutation,{run},,,{}", r.window_index, csvfmt::num(*np))?;
        }
    }
    Ok(())
}
