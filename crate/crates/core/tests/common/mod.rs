//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use chrono::{DateTime, Duration, TimeZone, Utc};
use sociometry::corpus::{self, CorpusSnapshot, DailyPartition};
use sociometry::{CommentRecord, EmbeddingStore, PostRecord};

pub fn at(day: u32, secs: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, day, 0, 0, 0).unwrap() + Duration::seconds(secs)
}

pub fn post(id: &str, author: &str, time: DateTime<Utc>, content: &str, score: i64) -> PostRecord {
    PostRecord {
        id: id.into(),
        author: author.into(),
        submolt: "general".into(),
        created_at: time,
        title: String::new(),
        content: content.into(),
        score,
    }
}

pub fn comment(id: &str, post_id: &str, author: &str, time: DateTime<Utc>, content: &str) -> CommentRecord {
    CommentRecord {
        id: id.into(),
        post_id: post_id.into(),
        author: author.into(),
        created_at: time,
        content: content.into(),
        parent_id: None,
        dangling: false,
    }
}

pub fn snapshot(posts: Vec<PostRecord>, comments: Vec<CommentRecord>) -> CorpusSnapshot {
    CorpusSnapshot::build(posts, comments).unwrap().0
}

pub fn with_partition(posts: Vec<PostRecord>, comments: Vec<CommentRecord>) -> (CorpusSnapshot, DailyPartition) {
    let s = snapshot(posts, comments);
    let p = corpus::partition_by_day(&s);
    (s, p)
}

pub fn store(dim: usize, entries: &[(&str, Vec<f32>)]) -> EmbeddingStore {
    EmbeddingStore::from_entries(dim, entries.iter().map(|(id, v)| (id.to_string(), v.clone()))).unwrap()
}

/// Unit vector at `deg` degrees in the plane.
pub fn angle(deg: f64) -> Vec<f32> {
    let r = deg.to_radians();
    vec![r.cos() as f32, r.sin() as f32]
}

pub fn cos64(u: &[f64], v: &[f64]) -> f64 {
    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    d / (nu * nv)
}

pub fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}
