//! N-gram lifespans and daily birth/death rates of the vocabulary.
//!
//! A gram is *active* on every day between its first and last observation,
//! *born* on its first day and *dead* on the day after its last one. Grams
//! seen fewer than `min_global_frequency` times across the corpus are
//! dropped before any lifespan is computed.

use std::collections::HashMap;
use std::io::{self, Write};

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::corpus::{CorpusSnapshot, DailyPartition};
use crate::csvfmt;
use crate::text::tokenize;

pub const MAX_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexicalConfig {
    pub n_max: usize,
    pub min_global_frequency: u64,
}

impl Default for LexicalConfig {
    fn default() -> Self {
        LexicalConfig { n_max: MAX_N, min_global_frequency: 2 }
    }
}

/// All contiguous n-grams (n = 1..=n_max) of a post, as a multiset in
/// order of appearance, grouped by n.
pub fn extract_ngrams(text: &str, n_max: usize) -> Vec<(usize, Vec<String>)> {
    let tokens = tokenize(text);
    let mut out = Vec::new();
    for n in 1..=n_max.min(tokens.len()) {
        out.extend(tokens.windows(n).map(|w| (n, w.to_vec())));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramRecord {
    pub gram: Vec<String>,
    pub n: usize,
    pub first_seen: NaiveDate,
    pub last_seen: NaiveDate,
    pub total_count: u64,
}

#[derive(Debug, Clone)]
struct GramStats {
    tokens: Box<[u32]>,
    first: u32,
    last: u32,
    count: u64,
}

/// Per-n lifespan tables and per-day set sizes.
#[derive(Debug, Clone)]
struct NTable {
    grams: Vec<GramStats>,
    observed: Vec<u64>,
    active: Vec<u64>,
    born: Vec<u64>,
    dead: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct LexiconTimeline {
    pub days: Vec<NaiveDate>,
    pub config: LexicalConfig,
    vocab: Vec<String>,
    tables: Vec<NTable>,
}

/// Per-day `|O_t|, |A_t|, |B_t|, |D_t|` for one n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaySizes {
    pub observed: u64,
    pub active: u64,
    pub born: u64,
    pub dead: u64,
}

pub fn build_timeline(snapshot: &CorpusSnapshot, partition: &DailyPartition, config: LexicalConfig) -> LexiconTimeline {
    let n_max = config.n_max.clamp(1, MAX_N);
    let days = partition.day_count();

    // Tokenize in parallel; everything after this is order-fixed.
    let order: Vec<usize> = partition.posts_by_day.iter().flatten().copied().collect();
    let tokenized: Vec<Vec<String>> = order.par_iter().map(|&i| tokenize(&snapshot.posts[i].text())).collect();

    let mut vocab: Vec<String> = Vec::new();
    let mut vocab_index: HashMap<String, u32> = HashMap::new();
    let mut encoded: Vec<Vec<u32>> = Vec::with_capacity(tokenized.len());
    for toks in tokenized {
        encoded.push(
            toks.into_iter()
                .map(|t| {
                    if let Some(&id) = vocab_index.get(&t) {
                        id
                    } else {
                        let id = vocab.len() as u32;
                        vocab.push(t.clone());
                        vocab_index.insert(t, id);
                        id
                    }
                })
                .collect(),
        );
    }
    drop(vocab_index);

    let mut post_day = Vec::with_capacity(order.len());
    for (d, posts) in partition.posts_by_day.iter().enumerate() {
        post_day.extend(std::iter::repeat_n(d as u32, posts.len()));
    }

    let tables = (1..=n_max).map(|n| build_table(n, &encoded, &post_day, days, config.min_global_frequency)).collect();

    LexiconTimeline { days: partition.days.clone(), config: LexicalConfig { n_max, ..config }, vocab, tables }
}

fn build_table(n: usize, encoded: &[Vec<u32>], post_day: &[u32], days: usize, min_freq: u64) -> NTable {
    let mut index: HashMap<Box<[u32]>, u32> = HashMap::new();
    let mut grams: Vec<GramStats> = Vec::new();
    // Last day each gram was counted as observed, to dedupe within a day.
    let mut marker: Vec<u32> = Vec::new();
    let mut observed_lists: Vec<Vec<u32>> = vec![Vec::new(); days];

    for (toks, &day) in encoded.iter().zip(post_day) {
        if toks.len() < n {
            continue;
        }
        for w in toks.windows(n) {
            let gid = match index.get(w) {
                Some(&g) => g,
                None => {
                    let g = grams.len() as u32;
                    index.insert(w.into(), g);
                    grams.push(GramStats { tokens: w.into(), first: day, last: day, count: 0 });
                    marker.push(u32::MAX);
                    g
                }
            } as usize;
            let s = &mut grams[gid];
            s.count += 1;
            s.last = day;
            if marker[gid] != day {
                marker[gid] = day;
                observed_lists[day as usize].push(gid as u32);
            }
        }
    }
    drop(index);

    let survives: Vec<bool> = grams.iter().map(|g| g.count >= min_freq).collect();
    let observed = observed_lists.iter().map(|l| l.iter().filter(|&&g| survives[g as usize]).count() as u64).collect();

    let grams: Vec<GramStats> = grams.into_iter().filter(|g| g.count >= min_freq).collect();
    let mut born = vec![0u64; days];
    let mut dead = vec![0u64; days];
    let mut delta = vec![0i64; days + 1];
    for g in &grams {
        born[g.first as usize] += 1;
        if (g.last as usize) + 1 < days {
            dead[g.last as usize + 1] += 1;
        }
        delta[g.first as usize] += 1;
        delta[g.last as usize + 1] -= 1;
    }
    let mut active = Vec::with_capacity(days);
    let mut running = 0i64;
    for d in delta.iter().take(days) {
        running += d;
        active.push(running as u64);
    }
    NTable { grams, observed, active, born, dead }
}

impl LexiconTimeline {
    pub fn n_max(&self) -> usize {
        self.tables.len()
    }

    pub fn day_sizes(&self, n: usize, day: usize) -> DaySizes {
        let t = &self.tables[n - 1];
        DaySizes { observed: t.observed[day], active: t.active[day], born: t.born[day], dead: t.dead[day] }
    }

    /// Number of distinct surviving grams of order `n`.
    pub fn distinct(&self, n: usize) -> usize {
        self.tables[n - 1].grams.len()
    }

    pub fn records(&self, n: usize) -> impl Iterator<Item = NGramRecord> + '_ {
        self.tables[n - 1].grams.iter().map(move |g| NGramRecord {
            gram: g.tokens.iter().map(|&t| self.vocab[t as usize].clone()).collect(),
            n,
            first_seen: self.days[g.first as usize],
            last_seen: self.days[g.last as usize],
            total_count: g.count,
        })
    }

    fn select(&self, n: usize, keep: impl Fn(&GramStats) -> bool) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self.tables[n - 1]
            .grams
            .iter()
            .filter(|g| keep(g))
            .map(|g| g.tokens.iter().map(|&t| self.vocab[t as usize].clone()).collect())
            .collect();
        out.sort();
        out
    }

    /// Sorted members of `A_t`.
    pub fn active_grams(&self, n: usize, day: usize) -> Vec<Vec<String>> {
        let d = day as u32;
        self.select(n, |g| g.first <= d && d <= g.last)
    }

    /// Sorted members of `B_t`.
    pub fn born_grams(&self, n: usize, day: usize) -> Vec<Vec<String>> {
        let d = day as u32;
        self.select(n, |g| g.first == d)
    }

    /// Sorted members of `D_t` (last seen on `day - 1`).
    pub fn dead_grams(&self, n: usize, day: usize) -> Vec<Vec<String>> {
        if day == 0 {
            return Vec::new();
        }
        let d = day as u32 - 1;
        self.select(n, |g| g.last == d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathRow {
    pub day: NaiveDate,
    pub day_index: usize,
    pub n: usize,
    pub birth_rate: Option<f64>,
    pub death_rate: Option<f64>,
    pub active: u64,
    pub born: u64,
    pub dead: u64,
}

/// Mean and min/max across n of the day's rates (absent rates skipped).
#[derive(Debug, Clone, PartialEq)]
pub struct RateBand {
    pub day: NaiveDate,
    pub birth_mean: Option<f64>,
    pub birth_min: Option<f64>,
    pub birth_max: Option<f64>,
    pub death_mean: Option<f64>,
    pub death_min: Option<f64>,
    pub death_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathSeries {
    pub rows: Vec<BirthDeathRow>,
    pub band: Vec<RateBand>,
}

fn band_stats(values: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None, None);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (Some(mean), Some(min), Some(max))
}

pub fn birth_death_series(timeline: &LexiconTimeline) -> BirthDeathSeries {
    let mut rows = Vec::new();
    let mut band = Vec::new();
    for (d, &day) in timeline.days.iter().enumerate() {
        let mut births = Vec::new();
        let mut deaths = Vec::new();
        for n in 1..=timeline.n_max() {
            let s = timeline.day_sizes(n, d);
            let birth_rate = (s.active > 0).then(|| s.born as f64 / s.active as f64);
            let death_rate = if d == 0 {
                None
            } else {
                let prev = timeline.day_sizes(n, d - 1).active;
                (prev > 0).then(|| s.dead as f64 / prev as f64)
            };
            births.extend(birth_rate);
            deaths.extend(death_rate);
            rows.push(BirthDeathRow {
                day,
                day_index: d,
                n,
                birth_rate,
                death_rate,
                active: s.active,
                born: s.born,
                dead: s.dead,
            });
        }
        let (birth_mean, birth_min, birth_max) = band_stats(&births);
        let (death_mean, death_min, death_max) = band_stats(&deaths);
        band.push(RateBand { day, birth_mean, birth_min, birth_max, death_mean, death_min, death_max });
    }
    BirthDeathSeries { rows, band }
}

impl BirthDeathSeries {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "day,n,birth_rate,death_rate,active,born,dead")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.day,
                r.n,
                csvfmt::opt(r.birth_rate),
                csvfmt::opt(r.death_rate),
                r.active,
                r.born,
                r.dead
            )?;
        }
        Ok(())
    }

    pub fn write_band_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "day,birth_mean,birth_min,birth_max,death_mean,death_min,death_max")?;
        for b in &self.band {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                b.day,
                csvfmt::opt(b.birth_mean),
                csvfmt::opt(b.birth_min),
                csvfmt::opt(b.birth_max),
                csvfmt::opt(b.death_mean),
                csvfmt::opt(b.death_min),
                csvfmt::opt(b.death_max)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{partition_by_day, timestamp, PostRecord};

    fn grams_of(text: &str, n: usize) -> Vec<Vec<String>> {
        extract_ngrams(text, 5).into_iter().filter(|(k, _)| *k == n).map(|(_, g)| g).collect()
    }

    #[test]
    fn hello_hello_world() {
        let uni = grams_of("Hello hello world", 1);
        assert_eq!(uni, vec![vec!["hello"], vec!["hello"], vec!["world"]]);
        let bi = grams_of("Hello hello world", 2);
        assert_eq!(bi, vec![vec!["hello", "hello"], vec!["hello", "world"]]);
    }

    #[test]
    fn urls_never_in_grams() {
        let all = extract_ngrams("see https://x.test/a now", 5);
        assert!(all.iter().all(|(_, g)| g.iter().all(|t| !t.contains("x.test") && t != "https")));
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn five_tokens_fifteen_grams() {
        assert_eq!(extract_ngrams("a b c d e", 5).len(), 15);
        assert!(extract_ngrams("", 5).is_empty());
    }

    fn day_snapshot(days: &[&[&str]]) -> CorpusSnapshot {
        let mut posts = Vec::new();
        for (d, texts) in days.iter().enumerate() {
            for (i, t) in texts.iter().enumerate() {
                posts.push(PostRecord {
                    id: format!("d{d}p{i}"),
                    author: "a".into(),
                    submolt: "general".into(),
                    created_at: timestamp::parse(&format!("2026-02-{:02}T12:00:00Z", d + 1)).unwrap(),
                    title: String::new(),
                    content: t.to_string(),
                    score: 0,
                });
            }
        }
        CorpusSnapshot::build(posts, vec![]).unwrap().0
    }

    #[test]
    fn singleton_gram_filtered() {
        let snap = day_snapshot(&[&["a b"], &["a"]]);
        let tl = build_timeline(&snap, &partition_by_day(&snap), LexicalConfig { n_max: 1, min_global_frequency: 2 });
        let grams: Vec<_> = tl.records(1).map(|r| r.gram).collect();
        assert_eq!(grams, vec![vec!["a".to_string()]]);
    }

    #[test]
    fn gap_day_still_active() {
        let snap = day_snapshot(&[&["x"], &["y"], &["x"]]);
        let tl = build_timeline(&snap, &partition_by_day(&snap), LexicalConfig { n_max: 1, min_global_frequency: 1 });
        assert!(tl.active_grams(1, 1).contains(&vec!["x".to_string()]));
    }

    #[test]
    fn first_day_birth_rate_is_one() {
        let snap = day_snapshot(&[&["a b c", "a b"], &["a c"]]);
        let tl = build_timeline(&snap, &partition_by_day(&snap), LexicalConfig::default());
        let series = birth_death_series(&tl);
        for r in series.rows.iter().filter(|r| r.day_index == 0) {
            if r.active > 0 {
                assert_eq!(r.birth_rate, Some(1.0));
            } else {
                assert_eq!(r.birth_rate, None);
            }
            assert_eq!(r.death_rate, None);
        }
    }
}
