//! Synthetic agent societies with known dynamics.
//!
//! Agents hold unit persona vectors scattered around topic anchors. Every
//! post embedding is the persona plus isotropic Gaussian noise, normalized.
//! Regimes differ in how personas evolve, how posts are scored and how
//! commenters pick their targets. Token text is drawn separately from
//! per-topic vocabularies whose words are born and retired on a schedule.
//!
//! Days are simulated in order; within a day each agent draws from streams
//! keyed by (seed, stage, agent, day), so the output does not depend on the
//! thread count.

use std::io::{self, Write};

use chrono::{Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CommentRecord, CorpusError, CorpusSnapshot, PostRecord};
use crate::embedding::{EmbeddingError, EmbeddingStore};
use crate::rng::keyed_rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("invalid regime config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    InertTurnover,
    Convergent,
    FeedbackAdaptive,
    Hierarchical,
    Egalitarian,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::InertTurnover,
        Regime::Convergent,
        Regime::FeedbackAdaptive,
        Regime::Hierarchical,
        Regime::Egalitarian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::InertTurnover => "inert_turnover",
            Regime::Convergent => "convergent",
            Regime::FeedbackAdaptive => "feedback_adaptive",
            Regime::Hierarchical => "hierarchical",
            Regime::Egalitarian => "egalitarian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

/// Generator parameters. `inert_turnover` freezes personas regardless of
/// the pull rates; `egalitarian` always picks comment targets uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub regime: Regime,
    pub agents: usize,
    pub days: usize,
    pub posts_per_agent_per_day: f64,
    pub comments_per_agent_per_day: f64,
    pub dim: usize,
    pub topics: usize,
    /// Per-component standard deviation of post noise.
    pub noise_sigma: f64,
    /// Per-component standard deviation of personas around their anchor.
    pub persona_spread: f64,
    /// Daily pull of each persona toward the mean persona.
    pub convergence_rate: f64,
    /// Daily pull of each persona toward its own top-scored recent posts.
    pub adaptation_rate: f64,
    /// Daily pull of each persona toward the posts it commented on.
    pub interaction_pull: f64,
    /// Comment targets are drawn with weight `(in_weight + 1)^exponent`.
    pub attachment_exponent: f64,
    /// Score = round(score_scale * cos(post, preference) + score_noise * z).
    pub score_scale: f64,
    pub score_noise: f64,
    /// Recent posts considered by adaptation.
    pub adaptation_window: usize,
    pub vocab_size: usize,
    pub vocab_birth_rate: f64,
    pub vocab_death_rate: f64,
    pub tokens_per_post: usize,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl RegimeConfig {
    pub fn new(regime: Regime) -> Self {
        RegimeConfig {
            regime,
            agents: 500,
            days: 30,
            posts_per_agent_per_day: 2.0,
            comments_per_agent_per_day: 2.0,
            dim: 64,
            topics: 8,
            noise_sigma: 0.05,
            persona_spread: 0.1,
            convergence_rate: 0.0,
            adaptation_rate: 0.0,
            interaction_pull: 0.0,
            attachment_exponent: 0.0,
            score_scale: 0.0,
            score_noise: 5.0,
            adaptation_window: 10,
            vocab_size: 200,
            vocab_birth_rate: 0.0,
            vocab_death_rate: 0.0,
            tokens_per_post: 16,
            start_date: NaiveDate::from_ymd_opt(2026, 1, 1).unwrap(),
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.agents < 1 || self.days < 1 {
            return bad("agents and days must be at least 1".into());
        }
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.topics < 1 || self.vocab_size < 1 || self.tokens_per_post < 1 || self.adaptation_window < 1 {
            return bad("topics, vocab_size, tokens_per_post and adaptation_window must be at least 1".into());
        }
        for (name, v) in [
            ("convergence_rate", self.convergence_rate),
            ("adaptation_rate", self.adaptation_rate),
            ("interaction_pull", self.interaction_pull),
            ("vocab_birth_rate", self.vocab_birth_rate),
            ("vocab_death_rate", self.vocab_death_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("posts_per_agent_per_day", self.posts_per_agent_per_day),
            ("comments_per_agent_per_day", self.comments_per_agent_per_day),
            ("noise_sigma", self.noise_sigma),
            ("persona_spread", self.persona_spread),
            ("attachment_exponent", self.attachment_exponent),
            ("score_noise", self.score_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !self.score_scale.is_finite() {
            return bad("score_scale must be finite".into());
        }
        if self.posts_per_agent_per_day == 0.0 {
            return bad("posts_per_agent_per_day must be positive".into());
        }
        Ok(())
    }

    fn frozen(&self) -> bool {
        self.regime == Regime::InertTurnover
    }

    fn effective_exponent(&self) -> f64 {
        if self.regime == Regime::Egalitarian {
            0.0
        } else {
            self.attachment_exponent
        }
    }
}

/// One canonical config per regime, each about 30k posts.
pub fn regime_presets() -> Vec<(&'static str, RegimeConfig)> {
    Regime::ALL
        .into_iter()
        .map(|r| {
            let mut c = RegimeConfig::new(r);
            match r {
                Regime::InertTurnover => {
                    c.vocab_birth_rate = 0.05;
                    c.vocab_death_rate = 0.05;
                }
                Regime::Convergent => c.convergence_rate = 0.2,
                Regime::FeedbackAdaptive => {
                    c.adaptation_rate = 0.3;
                    c.score_scale = 100.0;
                    c.score_noise = 1.0;
                }
                Regime::Hierarchical => c.attachment_exponent = 1.5,
                Regime::Egalitarian => {}
            }
            (r.as_str(), c)
        })
        .collect()
}

pub fn preset(regime: Regime) -> RegimeConfig {
    regime_presets().into_iter().find(|(_, c)| c.regime == regime).map(|(_, c)| c).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub regime: Regime,
    pub config: RegimeConfig,
    pub posts: usize,
    pub comments: usize,
    /// Audience preference direction used for scoring.
    pub preference: Vec<f64>,
    /// Topic index of each agent, in agent order.
    pub agent_topics: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SyntheticSociety {
    pub posts: Vec<PostRecord>,
    pub comments: Vec<CommentRecord>,
    pub store: EmbeddingStore,
    pub truth: GroundTruth,
}

impl SyntheticSociety {
    pub fn snapshot(&self) -> Result<CorpusSnapshot, CorpusError> {
        CorpusSnapshot::build(self.posts.clone(), self.comments.clone()).map(|(s, _, _)| s)
    }

    pub fn write_posts<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.posts {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_comments<W: Write>(&self, mut w: W) -> io::Result<()> {
        for c in &self.comments {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_truth<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.truth)?;
        w.write_all(b"\n")
    }
}

pub fn agent_id(a: usize) -> String {
    format!("agent_{a:05}")
}

// Stream tags.
const ANCHOR: u64 = 1;
const PERSONA: u64 = 2;
const POST: u64 = 3;
const COMMENT: u64 = 4;
const VOCAB: u64 = 5;
const PREFERENCE: u64 = 6;

const COMMON_WORDS: [&str; 24] = [
    "the", "and", "of", "to", "in", "is", "that", "it", "for", "we", "this", "with", "on", "are", "as", "what", "our",
    "about", "think", "just", "an", "all", "can", "not",
];
const CONSONANTS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Pronounceable, collision-free spelling of a vocabulary word id.
pub fn word(mut id: u64) -> String {
    let base = (CONSONANTS.len() * VOWELS.len()) as u64;
    let mut syllables = Vec::new();
    loop {
        let s = (id % base) as usize;
        syllables.push(format!("{}{}", CONSONANTS[s / VOWELS.len()], VOWELS[s % VOWELS.len()]));
        id /= base;
        if id == 0 && syllables.len() >= 2 {
            break;
        }
    }
    syllables.reverse();
    syllables.concat()
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian(rng, dim, 1.0);
        if v.iter().any(|x| *x != 0.0) {
            normalize(&mut v);
            return v;
        }
    }
}

/// `p <- normalize(p + rate * (target - p))`
fn pull(p: &mut [f64], target: &[f64], rate: f64) {
    p.iter_mut().zip(target).for_each(|(x, t)| *x += rate * (t - *x));
    normalize(p);
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).unwrap().sample(rng) as usize
    }
}

struct GenPost {
    agent: usize,
    seconds: u32,
    vector: Vec<f64>,
    score: i64,
    title: String,
    content: String,
}

struct GenComment {
    agent: usize,
    target: usize,
    seconds: u32,
}

// Posts leave at least ten minutes for comments later the same day.
const POST_WINDOW: u32 = 86_400 - 600;

fn draw_text(rng: &mut ChaCha8Rng, vocab: &[u64], n: usize, common: bool) -> String {
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        if vocab.is_empty() || (common && rng.random_bool(0.4)) {
            words.push(COMMON_WORDS[rng.random_range(0..COMMON_WORDS.len())].to_string());
        } else {
            words.push(word(vocab[rng.random_range(0..vocab.len())]));
        }
    }
    words.join(" ")
}

pub fn generate(config: &RegimeConfig) -> Result<SyntheticSociety, SynthError> {
    config.validate()?;
    let c = config;
    let seed = c.seed;
    let dim = c.dim;

    let anchors: Vec<Vec<f64>> = (0..c.topics).map(|t| unit(&mut keyed_rng(seed, &[ANCHOR, t as u64]), dim)).collect();
    let preference = unit(&mut keyed_rng(seed, &[PREFERENCE]), dim);
    let (agent_topics, mut personas): (Vec<usize>, Vec<Vec<f64>>) = (0..c.agents)
        .map(|a| {
            let mut rng = keyed_rng(seed, &[PERSONA, a as u64]);
            let topic = rng.random_range(0..c.topics);
            let mut p = anchors[topic].clone();
            p.iter_mut().zip(gaussian(&mut rng, dim, c.persona_spread)).for_each(|(x, n)| *x += n);
            normalize(&mut p);
            (topic, p)
        })
        .unzip();

    let mut vocab: Vec<Vec<u64>> =
        (0..c.topics as u64).map(|t| (0..c.vocab_size as u64).map(|i| t * c.vocab_size as u64 + i).collect()).collect();
    let mut next_word = (c.topics * c.vocab_size) as u64;

    let exponent = c.effective_exponent();
    let mut in_weight = vec![0u64; c.agents];
    // Recent (vector, score) pairs per agent for adaptation.
    let mut recent: Vec<Vec<(Vec<f64>, i64)>> = vec![Vec::new(); c.agents];

    let mut posts = Vec::new();
    let mut comments = Vec::new();
    let mut entries = Vec::new();

    for day in 0..c.days {
        let date = c.start_date + Duration::days(day as i64);
        let midnight = Utc.from_utc_datetime(&date.and_time(NaiveTime::MIN));

        if day > 0 {
            for (t, words) in vocab.iter_mut().enumerate() {
                let mut rng = keyed_rng(seed, &[VOCAB, t as u64, day as u64]);
                words.retain(|_| !rng.random_bool(c.vocab_death_rate));
                let born = Binomial::new(c.vocab_size as u64, c.vocab_birth_rate).unwrap().sample(&mut rng);
                for _ in 0..born {
                    words.push(next_word);
                    next_word += 1;
                }
            }
        }

        let day_posts: Vec<GenPost> = (0..c.agents)
            .into_par_iter()
            .map(|a| {
                let mut rng = keyed_rng(seed, &[POST, a as u64, day as u64]);
                let n = poisson(&mut rng, c.posts_per_agent_per_day);
                let words = &vocab[agent_topics[a]];
                let mut out: Vec<GenPost> = (0..n)
                    .map(|_| {
                        let mut v = personas[a].clone();
                        v.iter_mut().zip(gaussian(&mut rng, dim, c.noise_sigma)).for_each(|(x, e)| *x += e);
                        normalize(&mut v);
                        let affinity: f64 = v.iter().zip(&preference).map(|(x, h)| x * h).sum();
                        let z: f64 = rng.sample(StandardNormal);
                        GenPost {
                            agent: a,
                            seconds: rng.random_range(0..POST_WINDOW),
                            score: (c.score_scale * affinity + c.score_noise * z).round() as i64,
                            title: draw_text(&mut rng, words, 3, false),
                            content: draw_text(&mut rng, words, c.tokens_per_post, true),
                            vector: v,
                        }
                    })
                    .collect();
                out.sort_by_key(|p| p.seconds);
                out
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();

        let base = posts.len();
        let mut cumulative = Vec::with_capacity(day_posts.len());
        let mut total = 0.0;
        for p in &day_posts {
            total += ((in_weight[p.agent] + 1) as f64).powf(exponent);
            cumulative.push(total);
        }
        let day_comments: Vec<GenComment> = if day_posts.is_empty() {
            Vec::new()
        } else {
            (0..c.agents)
                .into_par_iter()
                .map(|a| {
                    let mut rng = keyed_rng(seed, &[COMMENT, a as u64, day as u64]);
                    let n = poisson(&mut rng, c.comments_per_agent_per_day);
                    let mut out = Vec::with_capacity(n);
                    for _ in 0..n {
                        // Rejection keeps the draw proportional among others' posts.
                        for _ in 0..32 {
                            let x = rng.random::<f64>() * total;
                            let target = cumulative.partition_point(|&w| w <= x).min(day_posts.len() - 1);
                            if day_posts[target].agent != a {
                                let lo = day_posts[target].seconds + 1;
                                out.push(GenComment { agent: a, target, seconds: rng.random_range(lo..86_400) });
                                break;
                            }
                        }
                    }
                    out
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        };

        // Emit records.
        let mut per_agent_k = vec![0usize; c.agents];
        for p in &day_posts {
            let k = per_agent_k[p.agent];
            per_agent_k[p.agent] += 1;
            let id = format!("p{day:03}_{:05}_{k:02}", p.agent);
            entries.push((id.clone(), p.vector.iter().map(|&x| x as f32).collect::<Vec<f32>>()));
            posts.push(PostRecord {
                id,
                author: agent_id(p.agent),
                submolt: format!("topic{:02}", agent_topics[p.agent]),
                created_at: midnight + Duration::seconds(p.seconds as i64),
                title: p.title.clone(),
                content: p.content.clone(),
                score: p.score,
            });
        }
        let mut per_agent_k = vec![0usize; c.agents];
        for cm in &day_comments {
            let k = per_agent_k[cm.agent];
            per_agent_k[cm.agent] += 1;
            let target = &posts[base + cm.target];
            comments.push(CommentRecord {
                id: format!("c{day:03}_{:05}_{k:02}", cm.agent),
                post_id: target.id.clone(),
                author: agent_id(cm.agent),
                created_at: midnight + Duration::seconds(cm.seconds as i64),
                content: draw_text(
                    &mut keyed_rng(seed, &[COMMENT, cm.agent as u64, day as u64, k as u64 + 1]),
                    &vocab[agent_topics[cm.agent]],
                    8,
                    true,
                ),
                parent_id: None,
                dangling: false,
            });
            in_weight[day_posts[cm.target].agent] += 1;
        }

        // Persona dynamics for the next day.
        if !c.frozen() {
            if c.convergence_rate > 0.0 {
                let mut center = vec![0.0; dim];
                for p in &personas {
                    center.iter_mut().zip(p).for_each(|(s, x)| *s += x / c.agents as f64);
                }
                personas.par_iter_mut().for_each(|p| pull(p, &center, c.convergence_rate));
            }
            if c.adaptation_rate > 0.0 {
                for p in &day_posts {
                    let r = &mut recent[p.agent];
                    r.push((p.vector.clone(), p.score));
                    if r.len() > c.adaptation_window {
                        r.remove(0);
                    }
                }
                personas.par_iter_mut().zip(&recent).for_each(|(p, r)| {
                    if r.is_empty() {
                        return;
                    }
                    let mut order: Vec<usize> = (0..r.len()).collect();
                    order.sort_by(|&i, &j| r[j].1.cmp(&r[i].1).then(i.cmp(&j)));
                    let top = ((0.3 * r.len() as f64).floor() as usize).max(1);
                    let mut target = vec![0.0; dim];
                    for &i in &order[..top] {
                        target.iter_mut().zip(&r[i].0).for_each(|(s, x)| *s += x / top as f64);
                    }
                    pull(p, &target, c.adaptation_rate);
                });
            }
            if c.interaction_pull > 0.0 {
                let mut targets: Vec<Vec<usize>> = vec![Vec::new(); c.agents];
                for cm in &day_comments {
                    targets[cm.agent].push(cm.target);
                }
                personas.par_iter_mut().zip(&targets).for_each(|(p, ts)| {
                    if ts.is_empty() {
                        return;
                    }
                    let mut target = vec![0.0; dim];
                    for &t in ts {
                        target.iter_mut().zip(&day_posts[t].vector).for_each(|(s, x)| *s += x / ts.len() as f64);
                    }
                    pull(p, &target, c.interaction_pull);
                });
            }
        }
    }

    posts.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
    comments.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
    let store = EmbeddingStore::from_entries(dim, entries)
        .map_err(|e: EmbeddingError| SynthError::InvalidConfig(format!("generated embedding rejected: {e}")))?;
    Ok(SyntheticSociety {
        truth: GroundTruth {
            regime: c.regime,
            config: c.clone(),
            posts: posts.len(),
            comments: comments.len(),
            preference,
            agent_topics,
        },
        posts,
        comments,
        store,
    })
}
