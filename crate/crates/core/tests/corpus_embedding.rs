mod common;

use std::io::Write;

use common::{at, comment, post, snapshot, with_partition};
use proptest::prelude::*;
use sociometry::corpus::{apply_spam_filter, ingest_files, macro_activity, summary, IngestOptions};
use sociometry::embedding::{cosine, fallback_embed, fallback_store, load_store, write_store, StoreFormat, MAGIC};
use sociometry::EmbeddingStore;

/// Day 1: 8 posts by a, a, b, c, c, c, d, e in two submolts, scores 1..=8.
/// Day 2: no posts, two comments. Day 3: 12 posts by a, f, g in three
/// submolts, two at -1 and ten at 5.
fn twenty_posts() -> (Vec<sociometry::PostRecord>, Vec<sociometry::CommentRecord>) {
    let mut posts = Vec::new();
    for (i, author) in ["a", "a", "b", "c", "c", "c", "d", "e"].iter().enumerate() {
        let mut p = post(&format!("d1_{i}"), author, at(1, i as i64), "hello", i as i64 + 1);
        p.submolt = if i < 5 { "general" } else { "crypto" }.into();
        posts.push(p);
    }
    for i in 0..12 {
        let author = ["a", "f", "g"][i / 4];
        let mut p = post(&format!("d3_{i:02}"), author, at(3, i as i64), "later", if i < 2 { -1 } else { 5 });
        p.submolt = ["general", "crypto", "introductions"][i % 3].into();
        posts.push(p);
    }
    let mut comments: Vec<_> = (0..5).map(|i| comment(&format!("c1_{i}"), "d1_0", "z", at(1, 100 + i), "ok")).collect();
    comments.push(comment("c2_0", "d1_1", "z", at(2, 0), "ok"));
    comments.push(comment("c2_1", "d3_00", "y", at(2, 5), "early"));
    (posts, comments)
}

#[test]
fn macro_activity_hand_tally() {
    let (posts, comments) = twenty_posts();
    let (s, p) = with_partition(posts, comments);
    let m = macro_activity(&s, &p);
    assert_eq!(m.days.len(), 3);
    let row = |d: usize| {
        let x = &m.days[d];
        (
            x.post_volume,
            x.unique_posting_users,
            x.new_posting_users,
            x.active_submolts,
            x.total_comments,
            x.total_upvotes,
        )
    };
    assert_eq!(row(0), (8, 5, 5, 2, 5, 36));
    assert_eq!(row(1), (0, 0, 0, 0, 2, 0));
    assert_eq!(row(2), (12, 3, 2, 3, 0, 48));
    assert_eq!(m.days[0].posts_per_active_submolt, Some(4.0));
    assert_eq!(m.days[1].posts_per_active_submolt, None);
    assert_eq!(m.days[2].posts_per_active_submolt, Some(4.0));

    assert_eq!(m.days.iter().map(|d| d.post_volume).sum::<usize>(), s.posts.len());
    assert_eq!(m.days.iter().map(|d| d.new_posting_users).sum::<usize>(), 7);

    let t = summary(&s);
    assert_eq!((t.total_posts, t.total_comments, t.unique_post_authors, t.unique_comment_authors), (20, 7, 7, 2));
    assert_eq!(t.posts_with_comments, 3);
    assert!((t.avg_comments_per_post.unwrap() - 7.0 / 20.0).abs() < 1e-12);
}

#[test]
fn spam_filter_drops_repeats_and_their_comments() {
    let (posts, comments) = twenty_posts();
    let s = snapshot(posts, comments);
    // "hello" occurs 8 times, "later" 12 times.
    let (f, r) = apply_spam_filter(&s, 10);
    assert_eq!((r.removed_posts, r.removed_comments), (12, 1));
    assert_eq!(f.posts.len(), 8);
    let (same, r) = apply_spam_filter(&s, 12);
    assert_eq!((r.removed_posts, same.posts.len()), (0, 20));
}

#[test]
fn ingest_from_files_tolerates_rare_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let posts = dir.path().join("posts.jsonl");
    let mut f = std::fs::File::create(&posts).unwrap();
    for i in 0..99 {
        writeln!(
            f,
            r#"{{"id":"p{i}","author":"a{}","submolt":"general","created_at":"2026-01-0{}T10:00:00Z","title":"t","content":"c {i}","score":{i}}}"#,
            i % 7,
            1 + i % 3
        )
        .unwrap();
    }
    writeln!(f, "{{not json").unwrap();
    drop(f);
    let (s, report) = ingest_files(&posts, None, &IngestOptions::default()).unwrap();
    assert_eq!((s.posts.len(), report.post_lines, report.malformed_count("posts")), (99, 100, 1));
    assert!(s.posts.windows(2).all(|w| (w[0].created_at, &w[0].id) <= (w[1].created_at, &w[1].id)));

    let strict = IngestOptions { max_malformed_fraction: 0.0 };
    assert!(ingest_files(&posts, None, &strict).is_err());
    assert!(ingest_files(&dir.path().join("missing.jsonl"), None, &strict).is_err());
}

#[test]
fn mbem_five_records_round_trip() {
    let entries = vec![
        ("e".to_string(), vec![3.0, 4.0, 0.0]),
        ("b".to_string(), vec![0.0, 0.0, 2.0]),
        ("a".to_string(), vec![1.0, 1.0, 1.0]),
        ("d".to_string(), vec![-1.0, 0.0, 0.0]),
        ("c".to_string(), vec![0.5, -0.5, 0.0]),
    ];
    let store = EmbeddingStore::from_entries(3, entries).unwrap();
    assert_eq!(store.ids(), ["a", "b", "c", "d", "e"]);
    for (_, v) in store.iter() {
        let n: f64 = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
    }
    assert_eq!(store.get("e").unwrap(), [0.6, 0.8, 0.0]);

    let mut bytes = Vec::new();
    store.write_mbem(&mut bytes).unwrap();
    assert_eq!(&bytes[..4], MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 5);
    // Per record: u16 id length, the id, then 3 f32.
    assert_eq!(bytes.len(), 20 + 5 * (2 + 1 + 12));
    let back = EmbeddingStore::read_mbem(bytes.as_slice()).unwrap();
    assert_eq!(back.ids(), store.ids());
    for (id, v) in store.iter() {
        assert_eq!(back.get(id).unwrap(), v);
    }

    let dir = tempfile::tempdir().unwrap();
    for (name, fmt) in [("e.mbem", StoreFormat::Mbem), ("e.csv", StoreFormat::Csv)] {
        let path = dir.path().join(name);
        write_store(&store, &path, fmt).unwrap();
        let loaded = load_store(&path, fmt).unwrap();
        for (id, v) in store.iter() {
            let w = loaded.get(id).unwrap();
            assert!(v.iter().zip(w).all(|(a, b)| (a - b).abs() < 1e-6));
        }
    }
}

#[test]
fn mbem_rejects_corrupt_input() {
    assert!(EmbeddingStore::read_mbem(&b"XXXX\x01\0\0\0"[..]).is_err());
    let store = EmbeddingStore::from_entries(2, [("a".to_string(), vec![1.0, 0.0])]).unwrap();
    let mut bytes = Vec::new();
    store.write_mbem(&mut bytes).unwrap();
    assert!(EmbeddingStore::read_mbem(&bytes[..bytes.len() - 1]).is_err());
    bytes[4] = 9;
    assert!(EmbeddingStore::read_mbem(bytes.as_slice()).is_err());
    assert!(EmbeddingStore::from_entries(2, [("z".to_string(), vec![0.0, 0.0])]).is_err());
    assert!(EmbeddingStore::from_entries(2, [("z".to_string(), vec![1.0])]).is_err());
}

#[test]
fn fallback_encoder_separates_unrelated_texts() {
    let words = |i: usize| (0..12).map(|j| format!("w{}x{}", i * 31 + j, j)).collect::<Vec<_>>().join(" ");
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let a = fallback_embed(&words(2 * i), 4096, 0).unwrap();
        let b = fallback_embed(&words(2 * i + 1), 4096, 0).unwrap();
        worst = worst.max(cosine(&a.0, &b.0).unwrap().abs());
    }
    assert!(worst < 0.2, "max |cos| {worst}");
    let t = "the same text";
    let v = fallback_embed(t, 64, 3).unwrap();
    assert!((cosine(&v.0, &v.0).unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(v, fallback_embed(t, 64, 3).unwrap());
    assert_ne!(v, fallback_embed(t, 64, 4).unwrap());
    assert!(fallback_embed(t, 1, 0).is_err());
}

#[test]
fn fallback_store_covers_every_post() {
    let (posts, comments) = twenty_posts();
    let s = snapshot(posts, comments);
    let store = fallback_store(&s, 32, 0).unwrap();
    assert_eq!(store.len(), 20);
    assert!(s.posts.iter().all(|p| store.contains(&p.id)));
}

proptest! {
    #[test]
    fn store_round_trips_through_mbem(rows in prop::collection::btree_map("[a-z0-9-]{1,12}", prop::collection::vec(-10.0f32..10.0, 4), 1..20)) {
        let entries: Vec<(String, Vec<f32>)> =
            rows.into_iter().filter(|(_, v)| v.iter().any(|x| x.abs() > 1e-3)).collect();
        prop_assume!(!entries.is_empty());
        let store = EmbeddingStore::from_entries(4, entries).unwrap();
        let mut bytes = Vec::new();
        store.write_mbem(&mut bytes).unwrap();
        let back = EmbeddingStore::read_mbem(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.ids(), store.ids());
        for (id, v) in store.iter() {
            let w = back.get(id).unwrap();
            prop_assert!(v.iter().zip(w).all(|(a, b)| (a - b).abs() < 1e-6));
        }
    }
}
