//! Society-level semantic metrics: daily centroids, centroid and pairwise
//! similarity matrices, same-day neighborhood density and the day-over-day
//! Jensen-Shannon divergence of density distributions.

use std::io::{self, Write};

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::corpus::{CorpusSnapshot, DailyPartition};
use crate::csvfmt;
use crate::embedding::{cosine, dot, norm, EmbeddingStore};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_BINS: usize = 50;
pub const HISTOGRAM_EPSILON: f64 = 1e-12;
/// Centroids with a norm below this are treated as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum SemanticError {
    #[error("{} posts have no embedding (first: {})", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    MissingEmbeddings(Vec<String>),
    #[error("every day has a degenerate or empty centroid")]
    AllDegenerate,
    #[error("need at least {needed} days with samples, found {found}")]
    NotEnoughDays { needed: usize, found: usize },
    #[error("bins must be positive")]
    ZeroBins,
}

/// What to do with posts that have no vector in the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Fail,
    Skip,
}

/// Store rows of each day's posts, after applying the missing policy.
#[derive(Debug, Clone)]
pub struct ResolvedDays {
    /// Per day: (post position, store row), in partition order.
    pub days: Vec<Vec<(usize, usize)>>,
    pub skipped: usize,
}

pub fn resolve_days(
    snapshot: &CorpusSnapshot,
    partition: &DailyPartition,
    store: &EmbeddingStore,
    policy: MissingPolicy,
) -> Result<ResolvedDays, SemanticError> {
    let mut missing = Vec::new();
    let days = partition
        .posts_by_day
        .iter()
        .map(|posts| {
            posts
                .iter()
                .filter_map(|&p| {
                    let id = &snapshot.posts[p].id;
                    match store.row_of(id) {
                        Some(r) => Some((p, r)),
                        None => {
                            missing.push(id.clone());
                            None
                        }
                    }
                })
                .collect()
        })
        .collect();
    if !missing.is_empty() && policy == MissingPolicy::Fail {
        return Err(SemanticError::MissingEmbeddings(missing));
    }
    Ok(ResolvedDays { days, skipped: missing.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyCentroids {
    pub days: Vec<NaiveDate>,
    /// Unnormalized mean of unit post vectors; `None` for empty days.
    pub centroids: Vec<Option<Vec<f64>>>,
    pub counts: Vec<usize>,
    /// Day indices whose centroid has (near-)zero norm.
    pub degenerate: Vec<usize>,
    /// Mean over all posts of the corpus.
    pub global: Option<Vec<f64>>,
    pub skipped_missing: usize,
}

impl DailyCentroids {
    pub fn is_degenerate(&self, day: usize) -> bool {
        self.degenerate.contains(&day)
    }
}

fn mean_of_rows(store: &EmbeddingStore, rows: impl Iterator<Item = usize>) -> (Vec<f64>, usize) {
    let mut acc = vec![0.0f64; store.dim()];
    let mut n = 0;
    for r in rows {
        for (a, &x) in acc.iter_mut().zip(store.row(r)) {
            *a += f64::from(x);
        }
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    (acc, n)
}

pub fn daily_centroids(
    snapshot: &CorpusSnapshot,
    partition: &DailyPartition,
    store: &EmbeddingStore,
    policy: MissingPolicy,
) -> Result<DailyCentroids, SemanticError> {
    let resolved = resolve_days(snapshot, partition, store, policy)?;
    let mut centroids = Vec::with_capacity(partition.day_count());
    let mut counts = Vec::with_capacity(partition.day_count());
    let mut degenerate = Vec::new();
    for (d, day) in resolved.days.iter().enumerate() {
        counts.push(day.len());
        if day.is_empty() {
            centroids.push(None);
            continue;
        }
        let (c, _) = mean_of_rows(store, day.iter().map(|&(_, r)| r));
        if norm(&c) < DEGENERATE_NORM {
            degenerate.push(d);
        }
        centroids.push(Some(c));
    }
    let (g, total) = mean_of_rows(store, resolved.days.iter().flatten().map(|&(_, r)| r));
    let global = (total > 0).then_some(g);
    Ok(DailyCentroids {
        days: partition.days.clone(),
        centroids,
        counts,
        degenerate,
        global,
        skipped_missing: resolved.skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Centroid,
    Pairwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub kind: MatrixKind,
    pub days: Vec<NaiveDate>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Days left out of the matrix (degenerate or empty centroids).
    pub excluded: Vec<NaiveDate>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "day")?;
        for d in &self.days {
            write!(w, ",{d}")?;
        }
        writeln!(w)?;
        for (d, row) in self.days.iter().zip(&self.values) {
            write!(w, "{d}")?;
            for v in row {
                write!(w, ",{}", csvfmt::opt(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn centroid_similarity(centroids: &DailyCentroids) -> Result<SimilarityMatrix, SemanticError> {
    let mut kept: Vec<(NaiveDate, &[f64])> = Vec::new();
    let mut excluded = Vec::new();
    for (d, c) in centroids.centroids.iter().enumerate() {
        match c {
            Some(c) if !centroids.is_degenerate(d) => kept.push((centroids.days[d], c)),
            _ => excluded.push(centroids.days[d]),
        }
    }
    if kept.is_empty() {
        return Err(SemanticError::AllDegenerate);
    }
    let values = kept
        .iter()
        .enumerate()
        .map(|(i, (_, ci))| {
            kept.iter().enumerate().map(|(j, (_, cj))| if i == j { Some(1.0) } else { cosine(ci, cj).ok() }).collect()
        })
        .collect();
    Ok(SimilarityMatrix { kind: MatrixKind::Centroid, days: kept.iter().map(|k| k.0).collect(), values, excluded })
}

/// Mean cosine over all cross-day post pairs, computed through daily sums
/// of unit vectors: off-diagonal `m_i . m_j`, diagonal
/// `(|sum v|^2 - N) / (N (N - 1))` (self-pairs excluded).
pub fn pairwise_similarity(
    snapshot: &CorpusSnapshot,
    partition: &DailyPartition,
    store: &EmbeddingStore,
    policy: MissingPolicy,
) -> Result<SimilarityMatrix, SemanticError> {
    let resolved = resolve_days(snapshot, partition, store, policy)?;
    let sums: Vec<(Vec<f64>, usize)> = resolved
        .days
        .iter()
        .map(|day| {
            let mut s = vec![0.0f64; store.dim()];
            for &(_, r) in day {
                for (a, &x) in s.iter_mut().zip(store.row(r)) {
                    *a += f64::from(x);
                }
            }
            (s, day.len())
        })
        .collect();
    let days = sums.len();
    let mut values = vec![vec![None; days]; days];
    for i in 0..days {
        let (si, ni) = &sums[i];
        if *ni == 0 {
            continue;
        }
        for j in i..days {
            let (sj, nj) = &sums[j];
            if *nj == 0 {
                continue;
            }
            let v = if i == j {
                (*ni >= 2).then(|| {
                    let n = *ni as f64;
                    ((dot(si, si) - n) / (n * (n - 1.0))).clamp(-1.0, 1.0)
                })
            } else {
                Some((dot(si, sj) / (*ni as f64 * *nj as f64)).clamp(-1.0, 1.0))
            };
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(SimilarityMatrix { kind: MatrixKind::Pairwise, days: partition.days.clone(), values, excluded: Vec::new() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityDistribution {
    pub k: usize,
    pub days: Vec<NaiveDate>,
    /// `S_K(p)` per post in partition order; `None` for skipped days.
    pub samples: Vec<Option<Vec<f64>>>,
    /// Post ids matching `samples`.
    pub post_ids: Vec<Vec<String>>,
    /// Days with fewer than K + 1 posts.
    pub skipped: Vec<NaiveDate>,
}

/// Mean cosine of every post to its K nearest same-day neighbors (exact;
/// ties broken by post id). Days with fewer than K + 1 posts are skipped.
pub fn local_density(
    snapshot: &CorpusSnapshot,
    partition: &DailyPartition,
    store: &EmbeddingStore,
    k: usize,
    policy: MissingPolicy,
) -> Result<DensityDistribution, SemanticError> {
    let resolved = resolve_days(snapshot, partition, store, policy)?;
    let per_day: Vec<Option<(Vec<f64>, Vec<String>)>> = resolved
        .days
        .par_iter()
        .map(|day| {
            if k == 0 || day.len() < k + 1 {
                return None;
            }
            let ids: Vec<&str> = day.iter().map(|&(p, _)| snapshot.posts[p].id.as_str()).collect();
            let rows: Vec<&[f32]> = day.iter().map(|&(_, r)| store.row(r)).collect();
            let values = knn_means(&rows, &ids, k);
            Some((values, ids.into_iter().map(String::from).collect()))
        })
        .collect();
    let mut samples = Vec::with_capacity(per_day.len());
    let mut post_ids = Vec::with_capacity(per_day.len());
    let mut skipped = Vec::new();
    for (d, r) in per_day.into_iter().enumerate() {
        match r {
            Some((v, ids)) => {
                samples.push(Some(v));
                post_ids.push(ids);
            }
            None => {
                skipped.push(partition.days[d]);
                samples.push(None);
                post_ids.push(Vec::new());
            }
        }
    }
    Ok(DensityDistribution { k, days: partition.days.clone(), samples, post_ids, skipped })
}

/// `S_K` for every row. Each pair's cosine is evaluated once and offered
/// to both rows; every row keeps its K best by (similarity desc, id asc)
/// and sums them in that order, so the result is independent of the
/// visiting order.
fn knn_means(rows: &[&[f32]], ids: &[&str], k: usize) -> Vec<f64> {
    use std::cmp::Ordering;
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.len());
    let mut mat = Vec::with_capacity(n * dim);
    let mut norms = Vec::with_capacity(n);
    for r in rows {
        mat.extend(r.iter().map(|&x| f64::from(x)));
        norms.push(norm(r));
    }
    let row = |i: usize| &mat[i * dim..(i + 1) * dim];
    let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then_with(|| ids[a.1].cmp(ids[b.1]));
    let offer = |top: &mut Vec<(f64, usize)>, cand: (f64, usize)| {
        if top.len() == k && cmp(&cand, &top[k - 1]) != Ordering::Less {
            return;
        }
        let at = top.partition_point(|x| cmp(x, &cand) == Ordering::Less);
        top.insert(at, cand);
        top.truncate(k);
    };
    let mut best: Vec<Vec<(f64, usize)>> = vec![Vec::with_capacity(k + 1); n];
    for i in 0..n {
        let vi = row(i);
        for j in i + 1..n {
            let s = (dot(vi, row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            offer(&mut best[i], (s, j));
            offer(&mut best[j], (s, i));
        }
    }
    best.into_iter().map(|top| top.iter().map(|x| x.0).sum::<f64>() / k as f64).collect()
}

impl DensityDistribution {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "day,post_id,s_k")?;
        for ((day, s), ids) in self.days.iter().zip(&self.samples).zip(&self.post_ids) {
            if let Some(s) = s {
                for (id, v) in ids.iter().zip(s) {
                    writeln!(w, "{day},{},{}", csvfmt::field(id), csvfmt::num(*v))?;
                }
            }
        }
        Ok(())
    }
}

/// Smoothed probability histogram over [-1, 1] with uniform bins.
pub fn histogram(samples: &[f64], bins: usize, epsilon: f64) -> Vec<f64> {
    let mut counts = vec![0.0f64; bins];
    for &s in samples {
        let pos = ((s.clamp(-1.0, 1.0) + 1.0) / 2.0 * bins as f64).floor() as usize;
        counts[pos.min(bins - 1)] += 1.0;
    }
    let total = samples.len() as f64;
    let mut p: Vec<f64> = counts.iter().map(|&c| if total > 0.0 { c / total } else { 0.0 } + epsilon).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

/// Jensen-Shannon divergence in bits of two probability vectors.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl_to_mix = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).filter(|(&x, _)| x > 0.0).map(|(&x, &y)| x * (x / (0.5 * (x + y))).log2()).sum()
    };
    (0.5 * kl_to_mix(p, q) + 0.5 * kl_to_mix(q, p)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsdLink {
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub jsd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsdSeries {
    pub links: Vec<JsdLink>,
    pub bins: usize,
    pub epsilon: f64,
}

pub fn density_shift(density: &DensityDistribution, bins: usize) -> Result<JsdSeries, SemanticError> {
    if bins == 0 {
        return Err(SemanticError::ZeroBins);
    }
    let with_samples = density.samples.iter().filter(|s| s.as_ref().is_some_and(|v| !v.is_empty())).count();
    if with_samples < 2 {
        return Err(SemanticError::NotEnoughDays { needed: 2, found: with_samples });
    }
    let hists: Vec<Option<Vec<f64>>> = density
        .samples
        .iter()
        .map(|s| s.as_ref().filter(|v| !v.is_empty()).map(|v| histogram(v, bins, HISTOGRAM_EPSILON)))
        .collect();
    let links = (1..density.days.len())
        .map(|t| JsdLink {
            from: density.days[t - 1],
            to: density.days[t],
            jsd: match (&hists[t - 1], &hists[t]) {
                (Some(p), Some(q)) => Some(js_divergence(p, q)),
                _ => None,
            },
        })
        .collect();
    Ok(JsdSeries { links, bins, epsilon: HISTOGRAM_EPSILON })
}

impl JsdSeries {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "from,to,jsd")?;
        for l in &self.links {
            writeln!(w, "{},{},{}", l.from, l.to, csvfmt::opt(l.jsd))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsd_identical_is_zero() {
        let h = histogram(&[0.1, 0.2, 0.5], 50, HISTOGRAM_EPSILON);
        assert!(js_divergence(&h, &h).abs() < 1e-15);
    }

    #[test]
    fn jsd_disjoint_is_one() {
        let p = histogram(&[-0.9, -0.8], 50, HISTOGRAM_EPSILON);
        let q = histogram(&[0.9, 0.8], 50, HISTOGRAM_EPSILON);
        assert!((js_divergence(&p, &q) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[-1.0, 1.0], 4, 0.0);
        assert_eq!(h, vec![0.5, 0.0, 0.0, 0.5]);
        let h = histogram(&[0.0], 4, 0.0);
        assert_eq!(h, vec![0.0, 0.0, 1.0, 0.0]);
    }
}
