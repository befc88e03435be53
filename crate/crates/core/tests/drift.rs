mod common;

use common::{angle, at, post, snapshot, store};
use proptest::prelude::*;
use sociometry::drift::{agent_drift, drift_by_activity, DriftConfig};
use sociometry::semantic::MissingPolicy;
use sociometry::stats::Distribution;
use sociometry::EmbeddingStore;

const FAIL: MissingPolicy = MissingPolicy::Fail;

fn cfg(min_posts: usize) -> DriftConfig {
    DriftConfig { min_posts, leave_one_out: false }
}

#[test]
fn quarter_turn_has_unit_drift_and_moves_off_center() {
    let s = snapshot((0..4).map(|i| post(&format!("p{i}"), "a", at(1, i), "x", 0)).collect(), vec![]);
    let e = store(2, &[("p0", angle(0.0)), ("p1", angle(0.0)), ("p2", angle(90.0)), ("p3", angle(90.0))]);
    let r = agent_drift(&s, &e, Some(&[1.0, 0.0]), cfg(2), FAIL).unwrap();
    let a = &r.records[0];
    assert!((a.drift_magnitude.unwrap() - 1.0).abs() < 1e-7);
    assert!((a.toward_center.unwrap() + 1.0).abs() < 1e-7);
    // The only agent is perfectly aligned with the mean.
    assert!((a.consistency.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn odd_history_puts_extra_post_late() {
    let s = snapshot((0..5).map(|i| post(&format!("p{i}"), "a", at(1, i), "x", 0)).collect(), vec![]);
    let e = store(
        2,
        &[("p0", angle(0.0)), ("p1", angle(0.0)), ("p2", angle(90.0)), ("p3", angle(90.0)), ("p4", angle(90.0))],
    );
    let r = agent_drift(&s, &e, None, cfg(2), FAIL).unwrap();
    let a = &r.records[0];
    assert_eq!(a.post_count, 5);
    assert!((a.early_centroid[0] - 1.0).abs() < 1e-7);
    assert!(a.late_centroid[0].abs() < 1e-7);
    assert!(a.toward_center.is_none());
}

#[test]
fn opposite_drifts_cancel_and_leave_one_out_sees_them() {
    let mut posts = Vec::new();
    let mut vecs = Vec::new();
    for (agent, from, to) in [("a", 0.0, 90.0), ("b", 90.0, 0.0)] {
        for i in 0..4 {
            let id = format!("{agent}{i}");
            posts.push(post(&id, agent, at(1, i), "x", 0));
            vecs.push((id, angle(if i < 2 { from } else { to })));
        }
    }
    let s = snapshot(posts, vec![]);
    let e = EmbeddingStore::from_entries(2, vecs).unwrap();
    let shared = agent_drift(&s, &e, None, cfg(2), FAIL).unwrap();
    assert!(shared.mean_drift.unwrap().iter().all(|x| x.abs() < 1e-7));
    let loo = agent_drift(&s, &e, None, DriftConfig { min_posts: 2, leave_one_out: true }, FAIL).unwrap();
    for r in &loo.records {
        assert!((r.consistency.unwrap() + 1.0).abs() < 1e-7);
    }
}

#[test]
fn agents_below_threshold_are_dropped() {
    let s = snapshot(
        vec![post("a0", "a", at(1, 0), "x", 0), post("a1", "a", at(1, 1), "x", 0), post("b0", "b", at(1, 2), "x", 0)],
        vec![],
    );
    let e = store(2, &[("a0", angle(0.0)), ("a1", angle(5.0)), ("b0", angle(10.0))]);
    let r = agent_drift(&s, &e, None, cfg(1), FAIL).unwrap();
    assert_eq!(r.records.len(), 1);
    assert_eq!(r.records[0].agent, "a");
}

#[test]
fn distribution_quantiles_interpolate_linearly() {
    // Linear interpolation between order statistics at position q * (n - 1).
    let d = Distribution::of(&[0.4, 0.1, 0.3, 0.2]);
    assert_eq!(d.count, 4);
    assert!((d.mean.unwrap() - 0.25).abs() < 1e-15);
    assert!((d.q25.unwrap() - 0.175).abs() < 1e-15);
    assert!((d.q50.unwrap() - 0.25).abs() < 1e-15);
    assert!((d.q95.unwrap() - 0.385).abs() < 1e-15);
    assert_eq!(Distribution::of(&[]).mean, None);
}

#[test]
fn activity_buckets_are_half_open() {
    let mut posts = Vec::new();
    let mut vecs = Vec::new();
    for (agent, n) in [("a", 3), ("b", 12), ("c", 25), ("d", 150)] {
        for i in 0..n {
            let id = format!("{agent}{i:03}");
            posts.push(post(&id, agent, at(1, i), "x", 0));
            vecs.push((id, angle(i as f64)));
        }
    }
    let s = snapshot(posts, vec![]);
    let e = EmbeddingStore::from_entries(2, vecs).unwrap();
    let r = agent_drift(&s, &e, None, cfg(2), FAIL).unwrap();
    let buckets = drift_by_activity(&r.records, &[10, 20, 50, 100]);
    let labels: Vec<&str> = buckets.iter().map(|b| b.label.as_str()).collect();
    assert_eq!(labels, ["[0,10)", "[10,20)", "[20,50)", "[50,100)", "[100,inf)"]);
    let counts: Vec<usize> = buckets.iter().map(|b| b.agents).collect();
    assert_eq!(counts, [1, 1, 1, 0, 1]);
    // No agent below the first edge: no leading bucket.
    assert_eq!(drift_by_activity(&r.records, &[2, 100]).len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_stay_in_range(raw in prop::collection::vec((0usize..4, 0.0f64..360.0), 4..60)) {
        let posts = raw.iter().enumerate().map(|(i, (a, _))| post(&format!("p{i:02}"), &format!("u{a}"), at(1, i as i64), "x", 0)).collect();
        let s = snapshot(posts, vec![]);
        let e = EmbeddingStore::from_entries(2, raw.iter().enumerate().map(|(i, (_, d))| (format!("p{i:02}"), angle(*d)))).unwrap();
        let g = [0.6, 0.8];
        let r = agent_drift(&s, &e, Some(&g), cfg(2), FAIL).unwrap();
        for rec in &r.records {
            prop_assert!(rec.post_count >= 2);
            if let Some(d) = rec.drift_magnitude {
                prop_assert!((-1e-9..=2.0 + 1e-9).contains(&d));
            }
            if let Some(c) = rec.consistency {
                prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&c));
            }
            if let Some(t) = rec.toward_center {
                prop_assert!((-2.0 - 1e-9..=2.0 + 1e-9).contains(&t));
            }
        }
        let total: usize = drift_by_activity(&r.records, &[5, 10]).iter().map(|b| b.agents).sum();
        prop_assert_eq!(total, r.records.len());
    }
}
