//! Cognitive-probe catalog and response classification.
//!
//! The catalog crosses three recommendation categories with five submolts
//! and three newcomer paraphrases. Responses are scanned for references to
//! users and posts, which are resolved against the corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{CommentRecord, CorpusSnapshot};
use crate::csvfmt;

pub const SUBMOLTS: [&str; 5] = ["general", "introductions", "crypto", "agents", "philosophy"];
pub const PARAPHRASES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeCategory {
    MustRead,
    AccountsToFollow,
    CommunityContext,
}

impl ProbeCategory {
    pub const ALL: [ProbeCategory; 3] =
        [ProbeCategory::MustRead, ProbeCategory::AccountsToFollow, ProbeCategory::CommunityContext];

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeCategory::MustRead => "must_read",
            ProbeCategory::AccountsToFollow => "accounts_to_follow",
            ProbeCategory::CommunityContext => "community_context",
        }
    }

    /// Id prefix; kept free of underscores so ids split unambiguously.
    pub fn prefix(self) -> &'static str {
        match self {
            ProbeCategory::MustRead => "mustread",
            ProbeCategory::AccountsToFollow => "follow",
            ProbeCategory::CommunityContext => "context",
        }
    }

    pub fn from_prefix(p: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.prefix() == p)
    }
}

/// A probe as published: exactly the four catalog fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePost {
    pub id: String,
    pub submolt: String,
    pub title: String,
    pub content: String,
}

impl ProbePost {
    /// `(category, paraphrase, submolt)` recovered from the id.
    pub fn parts(&self) -> Option<(ProbeCategory, usize, &str)> {
        parse_probe_id(&self.id)
    }
}

pub fn probe_id(category: ProbeCategory, paraphrase: usize, submolt: &str) -> String {
    format!("{}_{}_{}", category.prefix(), paraphrase, submolt)
}

pub fn parse_probe_id(id: &str) -> Option<(ProbeCategory, usize, &str)> {
    let mut it = id.splitn(3, '_');
    let category = ProbeCategory::from_prefix(it.next()?)?;
    let paraphrase: usize = it.next()?.parse().ok()?;
    let submolt = it.next()?;
    ((1..=PARAPHRASES).contains(&paraphrase) && SUBMOLTS.contains(&submolt)).then_some((category, paraphrase, submolt))
}

// (title, general wording, submolt wording with `{s}` placeholder)
type Template = (&'static str, &'static str, &'static str);

const MUST_READ: [Template; 3] = [
    (
        "New here: what should I read first?",
        "New here! I just joined and I'm trying to catch up. Which posts would you say are must-reads for someone arriving today? Links or titles both welcome.",
        "New here! I just joined m/{s} and I'm trying to catch up. Which posts in m/{s} would you say are must-reads for someone arriving today? Links or titles both welcome.",
    ),
    (
        "Just joined, looking for the classics",
        "Just joined the community. Are there a few posts everyone here seems to know about? I'd love pointers to the ones worth reading before I start posting.",
        "Just joined {s}. Are there a few posts everyone in {s} seems to know about? I'd love pointers to the ones worth reading before I start posting.",
    ),
    (
        "I'm new, which posts shaped this place?",
        "I'm new to this place and want to understand it properly. If you had to pick the most notable posts so far, which would they be?",
        "I'm new to the {s} submolt and want to understand it properly. If you had to pick the most notable {s} posts so far, which would they be?",
    ),
];

const FOLLOW: [Template; 3] = [
    (
        "New here: who should I follow?",
        "New here! Who are the accounts worth following? I'm looking for the agents whose posts people keep coming back to.",
        "New here! Who are the accounts worth following in m/{s}? I'm looking for the agents whose {s} posts people keep coming back to.",
    ),
    (
        "Just joined, looking for people to learn from",
        "Just joined and still finding my way around. Which users would you recommend I follow to get a feel for the community?",
        "Just joined {s} and still finding my way around. Which users would you recommend I follow to get a feel for the {s} crowd?",
    ),
    (
        "I'm new, who are the voices to know?",
        "I'm new to the platform. Who are the most influential or well-known agents here? Handles would help a lot.",
        "I'm new to m/{s}. Who are the most influential or well-known agents in {s}? Handles would help a lot.",
    ),
];

const CONTEXT: [Template; 3] = [
    (
        "New here: what is this community about?",
        "New here! Could someone give me a quick orientation? What are the main themes, norms and ongoing discussions I should know about?",
        "New here! Could someone give me a quick orientation to m/{s}? What are the main themes, norms and ongoing discussions in {s} I should know about?",
    ),
    (
        "Just joined, how does it work around here?",
        "Just joined. What are the unwritten rules here, and what has everyone been talking about lately?",
        "Just joined {s}. What are the unwritten rules in {s}, and what has everyone there been talking about lately?",
    ),
    (
        "I'm new, can someone fill me in?",
        "I'm new and a bit lost. What's the big picture of this community, and which discussions would help me get oriented?",
        "I'm new to m/{s} and a bit lost. What's the big picture of {s}, and which discussions would help me get oriented?",
    ),
];

fn templates(category: ProbeCategory) -> &'static [Template; 3] {
    match category {
        ProbeCategory::MustRead => &MUST_READ,
        ProbeCategory::AccountsToFollow => &FOLLOW,
        ProbeCategory::CommunityContext => &CONTEXT,
    }
}

/// The fixed 45-probe catalog, ordered by category, paraphrase, submolt.
pub fn generate_probes() -> Vec<ProbePost> {
    let mut out = Vec::with_capacity(45);
    for category in ProbeCategory::ALL {
        for (i, (title, general, scoped)) in templates(category).iter().enumerate() {
            for submolt in SUBMOLTS {
                let content = if submolt == "general" { general.to_string() } else { scoped.replace("{s}", submolt) };
                out.push(ProbePost {
                    id: probe_id(category, i + 1, submolt),
                    submolt: submolt.to_string(),
                    title: title.to_string(),
                    content,
                });
            }
        }
    }
    out
}

pub fn write_probes<W: Write>(probes: &[ProbePost], mut w: W) -> io::Result<()> {
    for p in probes {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_probes<R: BufRead>(r: R) -> io::Result<Vec<ProbePost>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::from)?);
    }
    Ok(out)
}

/// A comment left under a probe: the comment schema plus the probe id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResponse {
    pub probe_id: String,
    #[serde(flatten)]
    pub comment: CommentRecord,
}

pub fn read_responses<R: BufRead>(r: R) -> io::Result<Vec<ProbeResponse>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::from)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReferenceKind {
    User,
    Post,
}

impl ReferenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceKind::User => "user",
            ReferenceKind::Post => "post",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub comment_id: String,
    pub kind: ReferenceKind,
    pub raw: String,
    pub resolved: Option<String>,
    pub valid: bool,
}

static USER_AT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[^A-Za-z0-9_./@])@([A-Za-z0-9_-]+)").unwrap());
static USER_U: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[^A-Za-z0-9_/])u/([A-Za-z0-9_-]+)").unwrap());
static POST_URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*?/posts?/([A-Za-z0-9_-]+)").unwrap());
static UUID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}\b").unwrap());

/// `(kind, raw match, candidate id)` for every reference pattern in `text`,
/// in order of appearance.
pub fn extract_references(text: &str) -> Vec<(ReferenceKind, String, String)> {
    let mut found: Vec<(usize, ReferenceKind, String, String)> = Vec::new();
    for (re, sigil) in [(&*USER_AT, "@"), (&*USER_U, "u/")] {
        for c in re.captures_iter(text) {
            let name = c.get(1).unwrap();
            found.push((
                name.start(),
                ReferenceKind::User,
                format!("{sigil}{}", name.as_str()),
                name.as_str().to_string(),
            ));
        }
    }
    let mut url_spans = Vec::new();
    for c in POST_URL.captures_iter(text) {
        let whole = c.get(0).unwrap();
        let id = c.get(1).unwrap();
        url_spans.push(whole.start()..id.end());
        found.push((whole.start(), ReferenceKind::Post, whole.as_str().to_string(), id.as_str().to_string()));
    }
    for m in UUID.find_iter(text) {
        if url_spans.iter().any(|s| s.contains(&m.start())) {
            continue;
        }
        found.push((m.start(), ReferenceKind::Post, m.as_str().to_string(), m.as_str().to_string()));
    }
    found.sort_by_key(|f| f.0);
    found.into_iter().map(|(_, k, raw, id)| (k, raw, id)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    pub probe_id: String,
    pub comment_count: usize,
    pub has_external_reference: bool,
    pub references: Vec<Reference>,
    /// Valid `(kind, id)` targets, each counted once per comment.
    pub consensus_targets: BTreeMap<(ReferenceKind, String), usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResponseClass {
    NoResponse,
    WithoutReference,
    InvalidReference,
    ValidReference,
}

impl ProbeOutcome {
    pub fn class(&self) -> ResponseClass {
        if self.comment_count == 0 {
            ResponseClass::NoResponse
        } else if !self.has_external_reference {
            ResponseClass::WithoutReference
        } else if self.references.iter().any(|r| r.valid) {
            ResponseClass::ValidReference
        } else {
            ResponseClass::InvalidReference
        }
    }
}

/// Extracts and resolves the references in a probe's comments. User
/// handles resolve by exact match in the author registry, post ids by
/// exact match among ingested posts.
pub fn classify_responses(probe: &ProbePost, comments: &[CommentRecord], snapshot: &CorpusSnapshot) -> ProbeOutcome {
    let mut references = Vec::new();
    let mut consensus_targets: BTreeMap<(ReferenceKind, String), usize> = BTreeMap::new();
    for c in comments {
        let mut in_comment = BTreeSet::new();
        for (kind, raw, id) in extract_references(&c.content) {
            let known = match kind {
                ReferenceKind::User => snapshot.author_registry.contains(&id),
                ReferenceKind::Post => snapshot.post_position(&id).is_some(),
            };
            if known {
                in_comment.insert((kind, id.clone()));
            }
            references.push(Reference {
                comment_id: c.id.clone(),
                kind,
                raw,
                resolved: known.then_some(id),
                valid: known,
            });
        }
        for t in in_comment {
            *consensus_targets.entry(t).or_default() += 1;
        }
    }
    ProbeOutcome {
        probe_id: probe.id.clone(),
        comment_count: comments.len(),
        has_external_reference: !references.is_empty(),
        references,
        consensus_targets,
    }
}

/// Classifies every probe against responses grouped by `probe_id`.
/// Responses naming an id outside the catalog are returned separately.
pub fn classify_all(
    probes: &[ProbePost],
    responses: &[ProbeResponse],
    snapshot: &CorpusSnapshot,
) -> (Vec<ProbeOutcome>, Vec<String>) {
    let mut grouped: BTreeMap<&str, Vec<CommentRecord>> = BTreeMap::new();
    for r in responses {
        grouped.entry(r.probe_id.as_str()).or_default().push(r.comment.clone());
    }
    let known: BTreeSet<&str> = probes.iter().map(|p| p.id.as_str()).collect();
    let unknown = grouped.keys().filter(|k| !known.contains(*k)).map(|k| k.to_string()).collect();
    let outcomes = probes
        .iter()
        .map(|p| classify_responses(p, grouped.get(p.id.as_str()).map_or(&[], |v| v.as_slice()), snapshot))
        .collect();
    (outcomes, unknown)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusSummary {
    pub probes: usize,
    pub no_response: usize,
    pub without_reference: usize,
    pub invalid_reference: usize,
    pub valid_reference: usize,
    pub valid_mentions: usize,
    pub distinct_targets: usize,
    /// Largest share of valid mentions held by one target.
    pub max_share: Option<f64>,
    /// Catalog probes with no outcome.
    pub missing_probes: Vec<String>,
}

impl ConsensusSummary {
    pub fn breakdown(&self) -> [usize; 4] {
        [self.no_response, self.without_reference, self.invalid_reference, self.valid_reference]
    }
}

pub fn consensus_summary(outcomes: &[ProbeOutcome]) -> ConsensusSummary {
    let mut counts = [0usize; 4];
    let mut targets: BTreeMap<&(ReferenceKind, String), usize> = BTreeMap::new();
    for o in outcomes {
        counts[o.class() as usize] += 1;
        for (t, n) in &o.consensus_targets {
            *targets.entry(t).or_default() += n;
        }
    }
    let valid_mentions: usize = targets.values().sum();
    let present: BTreeSet<&str> = outcomes.iter().map(|o| o.probe_id.as_str()).collect();
    ConsensusSummary {
        probes: outcomes.len(),
        no_response: counts[0],
        without_reference: counts[1],
        invalid_reference: counts[2],
        valid_reference: counts[3],
        valid_mentions,
        distinct_targets: targets.len(),
        max_share: targets.values().max().map(|&m| m as f64 / valid_mentions as f64),
        missing_probes: generate_probes()
            .into_iter()
            .map(|p| p.id)
            .filter(|id| !present.contains(id.as_str()))
            .collect(),
    }
}

pub fn write_outcomes_csv<W: Write>(outcomes: &[ProbeOutcome], mut w: W) -> io::Result<()> {
    writeln!(w, "probe_id,comment_count,class,references,valid_references,distinct_valid_targets,targets")?;
    for o in outcomes {
        let class = match o.class() {
            ResponseClass::NoResponse => "no_response",
            ResponseClass::WithoutReference => "without_reference",
            ResponseClass::InvalidReference => "invalid_reference",
            ResponseClass::ValidReference => "valid_reference",
        };
        let targets: Vec<String> =
            o.consensus_targets.iter().map(|((k, id), n)| format!("{}:{id}={n}", k.as_str())).collect();
        writeln!(
            w,
            "{},{},{class},{},{},{},{}",
            csvfmt::field(&o.probe_id),
            o.comment_count,
            o.references.len(),
            o.references.iter().filter(|r| r.valid).count(),
            o.consensus_targets.len(),
            csvfmt::field(&targets.join(";"))
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn references_extracted() {
        let refs = extract_references("follow @eudaemon_0 and u/Shellraiser, mail a@b.com");
        let ids: Vec<&str> = refs.iter().map(|r| r.2.as_str()).collect();
        assert_eq!(ids, ["eudaemon_0", "Shellraiser"]);
        assert_eq!(refs[0].1, "@eudaemon_0");
        assert_eq!(refs[1].1, "u/Shellraiser");
    }

    #[test]
    fn post_urls_not_double_counted() {
        let id = "0b7c1e2a-1111-4222-8333-944455556666";
        let refs = extract_references(&format!("see https://www.moltbook.com/post/{id} or {id}"));
        assert_eq!(refs.len(), 2);
        assert!(refs.iter().all(|r| r.0 == ReferenceKind::Post && r.2 == id));
    }

    #[test]
    fn probe_ids_round_trip() {
        for p in generate_probes() {
            let (c, k, s) = p.parts().unwrap();
            assert_eq!(probe_id(c, k, s), p.id);
            assert_eq!(s, p.submolt);
        }
        assert!(parse_probe_id("follow_4_general").is_none());
        assert!(parse_probe_id("follow_1_memes").is_none());
    }
}
