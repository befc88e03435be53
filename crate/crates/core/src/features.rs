//! Per-post feature vectors in the two spaces the event studies use:
//! semantic (the embedding store) and syntactic (hashed 1-3-gram counts).

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::corpus::CorpusSnapshot;
use crate::embedding::{dot, EmbeddingStore};
use crate::rng::{fnv1a64, mix64};
use crate::text::tokenize;

pub const SYNTACTIC_DIM: usize = 4096;
pub const SYNTACTIC_MAX_N: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureSpace {
    Semantic,
    Syntactic,
}

impl FeatureSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSpace::Semantic => "semantic",
            FeatureSpace::Syntactic => "syntactic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "semantic" => Some(FeatureSpace::Semantic),
            "syntactic" => Some(FeatureSpace::Syntactic),
            _ => None,
        }
    }
}

/// Borrowed feature vector of one post.
#[derive(Debug, Clone, Copy)]
pub enum FeatureRef<'a> {
    Dense(&'a [f32]),
    /// Sorted by index, L2-normalized.
    Sparse(&'a [(u32, f32)]),
}

impl FeatureRef<'_> {
    pub fn add_to(&self, acc: &mut [f64]) {
        match self {
            FeatureRef::Dense(v) => acc.iter_mut().zip(v.iter()).for_each(|(a, &x)| *a += f64::from(x)),
            FeatureRef::Sparse(v) => v.iter().for_each(|&(i, x)| acc[i as usize] += f64::from(x)),
        }
    }

    pub fn dot_dense(&self, other: &[f64]) -> f64 {
        match self {
            FeatureRef::Dense(v) => dot(v, other),
            FeatureRef::Sparse(v) => v.iter().map(|&(i, x)| f64::from(x) * other[i as usize]).sum(),
        }
    }

    pub fn dot(&self, other: &FeatureRef<'_>) -> f64 {
        match (self, other) {
            (FeatureRef::Dense(a), FeatureRef::Dense(b)) => dot(a, b),
            (FeatureRef::Sparse(a), FeatureRef::Sparse(b)) => {
                let (mut i, mut j, mut s) = (0, 0, 0.0);
                while i < a.len() && j < b.len() {
                    match a[i].0.cmp(&b[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            s += f64::from(a[i].1) * f64::from(b[j].1);
                            i += 1;
                            j += 1;
                        }
                    }
                }
                s
            }
            (FeatureRef::Dense(d), FeatureRef::Sparse(s)) | (FeatureRef::Sparse(s), FeatureRef::Dense(d)) => {
                s.iter().map(|&(i, x)| f64::from(x) * f64::from(d[i as usize])).sum()
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Cosine clamped to [-1, 1]; `None` if either side has zero norm.
    pub fn cosine(&self, other: &FeatureRef<'_>) -> Option<f64> {
        let (a, b) = (self.norm(), other.norm());
        (a > 0.0 && b > 0.0).then(|| (self.dot(other) / (a * b)).clamp(-1.0, 1.0))
    }
}

enum Rows<'a> {
    Semantic { store: &'a EmbeddingStore, rows: Vec<Option<usize>> },
    Syntactic { rows: Vec<Option<Vec<(u32, f32)>>> },
}

/// Feature vector lookup by post position in a snapshot.
pub struct FeatureTable<'a> {
    space: FeatureSpace,
    dim: usize,
    rows: Rows<'a>,
}

impl<'a> FeatureTable<'a> {
    pub fn semantic(snapshot: &CorpusSnapshot, store: &'a EmbeddingStore) -> Self {
        let rows = snapshot.posts.iter().map(|p| store.row_of(&p.id)).collect();
        FeatureTable { space: FeatureSpace::Semantic, dim: store.dim(), rows: Rows::Semantic { store, rows } }
    }

    pub fn syntactic(snapshot: &CorpusSnapshot) -> FeatureTable<'static> {
        let rows = snapshot.posts.par_iter().map(|p| syntactic_features(&p.text())).collect();
        FeatureTable { space: FeatureSpace::Syntactic, dim: SYNTACTIC_DIM, rows: Rows::Syntactic { rows } }
    }

    pub fn space(&self) -> FeatureSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, post: usize) -> Option<FeatureRef<'_>> {
        match &self.rows {
            Rows::Semantic { store, rows } => rows[post].map(|r| FeatureRef::Dense(store.row(r))),
            Rows::Syntactic { rows } => rows[post].as_deref().map(FeatureRef::Sparse),
        }
    }

    /// Unnormalized mean of the posts' vectors; `None` when any post lacks
    /// features or the set is empty.
    pub fn centroid(&self, posts: &[usize]) -> Option<Vec<f64>> {
        if posts.is_empty() {
            return None;
        }
        let mut acc = vec![0.0; self.dim];
        for &p in posts {
            self.get(p)?.add_to(&mut acc);
        }
        let inv = 1.0 / posts.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Some(acc)
    }
}

fn gram_bucket(gram: &str) -> u32 {
    // Multiplicative hash; the top 12 bits select one of 4096 buckets.
    (mix64(fnv1a64(gram.as_bytes())).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 52) as u32
}

/// L2-normalized hashed counts of the text's 1-3-grams in
/// [`SYNTACTIC_DIM`] buckets. `None` for token-free text.
pub fn syntactic_features(text: &str) -> Option<Vec<(u32, f32)>> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return None;
    }
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for n in 1..=SYNTACTIC_MAX_N.min(tokens.len()) {
        for w in tokens.windows(n) {
            *counts.entry(gram_bucket(&w.join(" "))).or_default() += 1.0;
        }
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    Some(counts.into_iter().map(|(i, c)| (i, (c / norm) as f32)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syntactic_unit_norm_sorted() {
        let f = syntactic_features("the cat sat on the mat").unwrap();
        assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        let r = FeatureRef::Sparse(&f);
        assert!((r.norm() - 1.0).abs() < 1e-6);
        assert!(f.iter().all(|&(i, _)| (i as usize) < SYNTACTIC_DIM));
        assert!(syntactic_features("!!!").is_none());
    }

    #[test]
    fn sparse_dot_matches_dense() {
        let a = syntactic_features("alpha beta gamma").unwrap();
        let b = syntactic_features("beta gamma delta").unwrap();
        let mut dense = vec![0.0; SYNTACTIC_DIM];
        FeatureRef::Sparse(&b).add_to(&mut dense);
        let s1 = FeatureRef::Sparse(&a).dot(&FeatureRef::Sparse(&b));
        let s2 = FeatureRef::Sparse(&a).dot_dense(&dense);
        assert!((s1 - s2).abs() < 1e-12);
        assert!(s1 > 0.0);
    }
}
