mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{at, post, with_partition};
use proptest::prelude::*;
use sociometry::lexical::{birth_death_series, build_timeline, LexicalConfig};
use sociometry::text::tokenize;

fn unigrams() -> LexicalConfig {
    LexicalConfig { n_max: 1, min_global_frequency: 2 }
}

fn words(v: &[Vec<String>]) -> Vec<&str> {
    v.iter().map(|g| g[0].as_str()).collect()
}

#[test]
fn three_day_fixture_active_sets() {
    // O1 = {a, b}, O2 = {b, c}, O3 = {a}; c occurs once and is filtered.
    let (s, p) = with_partition(
        vec![
            post("p1", "x", at(1, 0), "alpha beta", 0),
            post("p2", "x", at(2, 0), "beta gamma", 0),
            post("p3", "x", at(3, 0), "alpha", 0),
        ],
        vec![],
    );
    let t = build_timeline(&s, &p, unigrams());
    assert_eq!(words(&t.active_grams(1, 0)), ["alpha", "beta"]);
    assert_eq!(words(&t.active_grams(1, 1)), ["alpha", "beta"]);
    assert_eq!(words(&t.active_grams(1, 2)), ["alpha"]);
    assert_eq!(words(&t.dead_grams(1, 2)), ["beta"]);
    assert_eq!(t.distinct(1), 2);

    let series = birth_death_series(&t);
    let r: Vec<_> = series.rows.iter().filter(|r| r.n == 1).collect();
    assert_eq!(r[0].birth_rate, Some(1.0));
    assert_eq!(r[0].death_rate, None);
    assert_eq!(r[1].birth_rate, Some(0.0));
    assert_eq!(r[1].death_rate, Some(0.0));
    assert_eq!(r[2].death_rate, Some(0.5));
}

#[test]
fn final_day_grams_never_die() {
    let (s, p) =
        with_partition(vec![post("p1", "x", at(1, 0), "one two", 0), post("p2", "x", at(2, 0), "one two", 0)], vec![]);
    let t = build_timeline(&s, &p, unigrams());
    let series = birth_death_series(&t);
    assert!(series.rows.iter().all(|r| r.dead == 0));
}

/// Day-by-day set bookkeeping straight from the definitions.
struct Oracle {
    active: Vec<BTreeSet<Vec<String>>>,
    born: Vec<BTreeSet<Vec<String>>>,
    dead: Vec<BTreeSet<Vec<String>>>,
}

fn oracle(days: &[Vec<String>], n: usize, min_freq: u64) -> Oracle {
    let mut count: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    let mut seen: Vec<BTreeSet<Vec<String>>> = vec![BTreeSet::new(); days.len()];
    for (d, texts) in days.iter().enumerate() {
        for text in texts {
            let toks = tokenize(text);
            for w in toks.windows(n) {
                *count.entry(w.to_vec()).or_default() += 1;
                seen[d].insert(w.to_vec());
            }
        }
    }
    let keep: BTreeSet<_> = count.into_iter().filter(|(_, c)| *c >= min_freq).map(|(g, _)| g).collect();
    let mut first = BTreeMap::new();
    let mut last = BTreeMap::new();
    for (d, set) in seen.iter().enumerate() {
        for g in set.iter().filter(|g| keep.contains(*g)) {
            first.entry(g.clone()).or_insert(d);
            last.insert(g.clone(), d);
        }
    }
    let nd = days.len();
    let mut o =
        Oracle { active: vec![BTreeSet::new(); nd], born: vec![BTreeSet::new(); nd], dead: vec![BTreeSet::new(); nd] };
    for g in &keep {
        let (f, l) = (first[g], last[g]);
        for d in f..=l {
            o.active[d].insert(g.clone());
        }
        o.born[f].insert(g.clone());
        if l + 1 < nd {
            o.dead[l + 1].insert(g.clone());
        }
    }
    o
}

const VOCAB: [&str; 8] = ["ant", "bee", "cat", "dog", "eel", "fox", "gnu", "hen"];

fn corpus_strategy() -> impl Strategy<Value = Vec<(u32, Vec<usize>)>> {
    prop::collection::vec((1u32..=6, prop::collection::vec(0usize..VOCAB.len(), 0..6)), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_set_difference_oracle(raw in corpus_strategy()) {
        let posts: Vec<_> = raw
            .iter()
            .enumerate()
            .map(|(i, (day, toks))| {
                let text: Vec<&str> = toks.iter().map(|&t| VOCAB[t]).collect();
                post(&format!("p{i:03}"), "a", at(*day, i as i64), &text.join(" "), 0)
            })
            .collect();
        let (s, p) = with_partition(posts, vec![]);
        let cfg = LexicalConfig { n_max: 3, min_global_frequency: 2 };
        let t = build_timeline(&s, &p, cfg);
        let per_day: Vec<Vec<String>> =
            p.posts_by_day.iter().map(|ids| ids.iter().map(|&i| s.posts[i].text()).collect()).collect();
        for n in 1..=3 {
            let o = oracle(&per_day, n, 2);
            for d in 0..p.day_count() {
                let set = |v: Vec<Vec<String>>| v.into_iter().collect::<BTreeSet<_>>();
                prop_assert_eq!(set(t.active_grams(n, d)), o.active[d].clone());
                prop_assert_eq!(set(t.born_grams(n, d)), o.born[d].clone());
                prop_assert_eq!(set(t.dead_grams(n, d)), o.dead[d].clone());
            }
        }
    }

    #[test]
    fn rates_bounded_and_accounting_closes(raw in corpus_strategy()) {
        let posts: Vec<_> = raw
            .iter()
            .enumerate()
            .map(|(i, (day, toks))| {
                let text: Vec<&str> = toks.iter().map(|&t| VOCAB[t]).collect();
                post(&format!("p{i:03}"), "a", at(*day, i as i64), &text.join(" "), 0)
            })
            .collect();
        let (s, p) = with_partition(posts, vec![]);
        let t = build_timeline(&s, &p, LexicalConfig::default());
        let series = birth_death_series(&t);
        for r in &series.rows {
            for v in r.birth_rate.iter().chain(&r.death_rate) {
                prop_assert!((0.0..=1.0).contains(v));
            }
            if r.day_index == 0 && r.active > 0 {
                prop_assert_eq!(r.birth_rate, Some(1.0));
            }
        }
        let last = p.day_count() - 1;
        for n in 1..=t.n_max() {
            let born: u64 = (0..p.day_count()).map(|d| t.day_sizes(n, d).born).sum();
            let dead: u64 = (0..p.day_count()).map(|d| t.day_sizes(n, d).dead).sum();
            let censored = t.records(n).filter(|g| g.last_seen == p.days[last]).count() as u64;
            prop_assert_eq!(born, t.distinct(n) as u64);
            prop_assert_eq!(dead + censored, t.distinct(n) as u64);
        }
    }

    #[test]
    fn relabeling_ids_and_authors_changes_nothing(raw in corpus_strategy()) {
        let build = |rename: bool| {
            let posts: Vec<_> = raw
                .iter()
                .enumerate()
                .map(|(i, (day, toks))| {
                    let text: Vec<&str> = toks.iter().map(|&t| VOCAB[t]).collect();
                    let (id, author) = if rename { (format!("z{i:03}"), format!("u{}", i % 3)) } else { (format!("p{i:03}"), "a".into()) };
                    post(&id, &author, at(*day, i as i64), &text.join(" "), 0)
                })
                .collect();
            let (s, p) = with_partition(posts, vec![]);
            birth_death_series(&build_timeline(&s, &p, LexicalConfig::default())).rows
        };
        prop_assert_eq!(build(false), build(true));
    }
}
