//! Ingestion, validation, spam filtering and day partitioning of platform
//! dumps, plus macro activity statistics.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::csvfmt;
use crate::text::compose_post_text;

/// Default tolerated fraction of malformed lines per input stream.
pub const DEFAULT_MAX_MALFORMED: f64 = 0.01;
/// Default repeat threshold of the spam filter.
pub const DEFAULT_SPAM_THRESHOLD: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {what}: {source}")]
    Io {
        what: String,
        #[source]
        source: io::Error,
    },
    #[error("duplicate post id `{0}`")]
    DuplicatePostId(String),
    #[error("duplicate comment id `{0}`")]
    DuplicateCommentId(String),
    #[error("{stream}: {malformed} of {total} lines malformed (limit {limit:.2}%)")]
    TooManyMalformed { stream: &'static str, malformed: usize, total: usize, limit: f64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

/// Timestamps travel as ISO-8601 UTC with second resolution.
pub mod timestamp {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn format(t: &DateTime<Utc>) -> String {
        t.to_rfc3339_opts(SecondsFormat::Secs, true)
    }

    /// Parses RFC 3339 (any offset) and truncates to whole seconds in UTC.
    pub fn parse(s: &str) -> Option<DateTime<Utc>> {
        let t = DateTime::parse_from_rfc3339(s.trim()).ok()?;
        DateTime::<Utc>::from_timestamp(t.timestamp(), 0)
    }

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).ok_or_else(|| serde::de::Error::custom(format!("bad timestamp `{raw}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub author: String,
    pub submolt: String,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub title: String,
    pub content: String,
    /// Net score (upvotes minus downvotes).
    pub score: i64,
}

impl PostRecord {
    /// Text used by all downstream text analysis.
    pub fn text(&self) -> String {
        compose_post_text(&self.title, &self.content)
    }

    pub fn day(&self) -> NaiveDate {
        self.created_at.date_naive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub id: String,
    pub post_id: String,
    pub author: String,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub content: String,
    /// Parent comment when the dump carries thread structure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    /// Set when `post_id` does not resolve to an ingested post.
    #[serde(skip)]
    pub dangling: bool,
}

impl CommentRecord {
    pub fn day(&self) -> NaiveDate {
        self.created_at.date_naive()
    }
}

// Lenient wire shapes: every field optional so schema violations are
// reported as malformed lines instead of hard parse failures.
#[derive(Deserialize)]
struct RawPost {
    id: Option<String>,
    author: Option<String>,
    submolt: Option<String>,
    created_at: Option<String>,
    title: Option<String>,
    content: Option<String>,
    score: Option<i64>,
}

#[derive(Deserialize)]
struct RawComment {
    id: Option<String>,
    post_id: Option<String>,
    author: Option<String>,
    created_at: Option<String>,
    content: Option<String>,
    parent_id: Option<String>,
}

fn required(field: Option<String>, name: &str) -> Result<String, String> {
    match field {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("missing `{name}`")),
    }
}

fn parse_time(field: Option<String>) -> Result<DateTime<Utc>, String> {
    let raw = required(field, "created_at")?;
    timestamp::parse(&raw).ok_or_else(|| format!("unparseable created_at `{raw}`"))
}

fn parse_post_line(line: &str) -> Result<PostRecord, String> {
    let raw: RawPost = serde_json::from_str(line).map_err(|e| e.to_string())?;
    Ok(PostRecord {
        id: required(raw.id, "id")?,
        author: required(raw.author, "author")?,
        submolt: raw.submolt.ok_or("missing `submolt`")?,
        created_at: parse_time(raw.created_at)?,
        title: raw.title.unwrap_or_default(),
        content: raw.content.ok_or("missing `content`")?,
        score: raw.score.ok_or("missing `score`")?,
    })
}

fn parse_comment_line(line: &str) -> Result<CommentRecord, String> {
    let raw: RawComment = serde_json::from_str(line).map_err(|e| e.to_string())?;
    Ok(CommentRecord {
        id: required(raw.id, "id")?,
        post_id: required(raw.post_id, "post_id")?,
        author: required(raw.author, "author")?,
        created_at: parse_time(raw.created_at)?,
        content: raw.content.unwrap_or_default(),
        parent_id: raw.parent_id.filter(|p| !p.is_empty()),
        dangling: false,
    })
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Fraction of malformed lines per stream above which ingestion fails.
    pub max_malformed_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { max_malformed_fraction: DEFAULT_MAX_MALFORMED }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    pub stream: &'static str,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub post_lines: usize,
    pub comment_lines: usize,
    pub malformed: Vec<MalformedLine>,
    /// Comments whose post is unknown and that could not be attached to a
    /// known parent comment.
    pub dangling_dropped: usize,
    /// Comments whose post is unknown but whose parent comment is known.
    pub dangling_retained: usize,
}

impl IngestReport {
    pub fn malformed_count(&self, stream: &str) -> usize {
        self.malformed.iter().filter(|m| m.stream == stream).count()
    }
}

fn read_stream<R: BufRead, T>(
    reader: R,
    stream: &'static str,
    parse: fn(&str) -> Result<T, String>,
    report: &mut IngestReport,
    opts: &IngestOptions,
) -> Result<(Vec<T>, usize), CorpusError> {
    let mut out = Vec::new();
    let mut total = 0usize;
    let mut bad = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { what: stream.to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse(&line) {
            Ok(rec) => out.push(rec),
            Err(reason) => {
                bad += 1;
                report.malformed.push(MalformedLine { stream, line: i + 1, reason });
            }
        }
    }
    if total > 0 && bad as f64 > opts.max_malformed_fraction * total as f64 {
        return Err(CorpusError::TooManyMalformed {
            stream,
            malformed: bad,
            total,
            limit: opts.max_malformed_fraction * 100.0,
        });
    }
    Ok((out, total))
}

/// Immutable, sorted view of an ingested dump.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSnapshot {
    pub posts: Vec<PostRecord>,
    pub comments: Vec<CommentRecord>,
    pub author_registry: BTreeSet<String>,
    post_index: HashMap<String, usize>,
}

impl CorpusSnapshot {
    /// Sorts, checks id uniqueness and resolves comment references.
    /// Returns the snapshot and `(dangling_retained, dangling_dropped)`.
    pub fn build(
        mut posts: Vec<PostRecord>,
        mut comments: Vec<CommentRecord>,
    ) -> Result<(Self, usize, usize), CorpusError> {
        posts.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        comments.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));

        let mut post_index = HashMap::with_capacity(posts.len());
        for (i, p) in posts.iter().enumerate() {
            if p.author.is_empty() {
                return Err(CorpusError::InvalidRecord(format!("post `{}` has empty author", p.id)));
            }
            if post_index.insert(p.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicatePostId(p.id.clone()));
            }
        }
        let mut comment_ids = HashSet::with_capacity(comments.len());
        for c in &comments {
            if !comment_ids.insert(c.id.as_str()) {
                return Err(CorpusError::DuplicateCommentId(c.id.clone()));
            }
        }
        let mut known_parent = vec![false; comments.len()];
        for (i, c) in comments.iter().enumerate() {
            known_parent[i] = c.parent_id.as_deref().is_some_and(|p| comment_ids.contains(p));
        }
        drop(comment_ids);

        let mut retained = 0;
        let mut dropped = 0;
        let mut kept = Vec::with_capacity(comments.len());
        for (mut c, has_parent) in comments.into_iter().zip(known_parent) {
            if post_index.contains_key(&c.post_id) {
                c.dangling = false;
                kept.push(c);
            } else if has_parent {
                c.dangling = true;
                retained += 1;
                kept.push(c);
            } else {
                dropped += 1;
            }
        }

        let author_registry =
            posts.iter().map(|p| p.author.clone()).chain(kept.iter().map(|c| c.author.clone())).collect();
        Ok((CorpusSnapshot { posts, comments: kept, author_registry, post_index }, retained, dropped))
    }

    pub fn empty() -> Self {
        CorpusSnapshot {
            posts: Vec::new(),
            comments: Vec::new(),
            author_registry: BTreeSet::new(),
            post_index: HashMap::new(),
        }
    }

    pub fn post_position(&self, id: &str) -> Option<usize> {
        self.post_index.get(id).copied()
    }

    pub fn post(&self, id: &str) -> Option<&PostRecord> {
        self.post_position(id).map(|i| &self.posts[i])
    }

    /// Post positions per author, chronological.
    pub fn posts_by_author(&self) -> HashMap<&str, Vec<usize>> {
        let mut map: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, p) in self.posts.iter().enumerate() {
            map.entry(p.author.as_str()).or_default().push(i);
        }
        map
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
}

/// Reads line-delimited post and comment records into a snapshot.
pub fn ingest<P: BufRead, C: BufRead>(
    posts: P,
    comments: C,
    opts: &IngestOptions,
) -> Result<(CorpusSnapshot, IngestReport), CorpusError> {
    let mut report = IngestReport::default();
    let (posts, post_lines) = read_stream(posts, "posts", parse_post_line, &mut report, opts)?;
    let (comments, comment_lines) = read_stream(comments, "comments", parse_comment_line, &mut report, opts)?;
    report.post_lines = post_lines;
    report.comment_lines = comment_lines;
    let (snapshot, retained, dropped) = CorpusSnapshot::build(posts, comments)?;
    report.dangling_retained = retained;
    report.dangling_dropped = dropped;
    Ok((snapshot, report))
}

/// File-based [`ingest`]; a missing comments path means no comments.
pub fn ingest_files(
    posts: &Path,
    comments: Option<&Path>,
    opts: &IngestOptions,
) -> Result<(CorpusSnapshot, IngestReport), CorpusError> {
    let open = |p: &Path| {
        File::open(p).map(BufReader::new).map_err(|source| CorpusError::Io { what: p.display().to_string(), source })
    };
    let post_reader = open(posts)?;
    match comments {
        Some(c) => ingest(post_reader, open(c)?, opts),
        None => ingest(post_reader, io::empty(), opts),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SpamReport {
    pub removed_posts: usize,
    pub removed_comments: usize,
}

/// Drops every post whose exact `content` occurs more than
/// `repeat_threshold` times, together with the comments attached to it.
pub fn apply_spam_filter(snapshot: &CorpusSnapshot, repeat_threshold: usize) -> (CorpusSnapshot, SpamReport) {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for p in &snapshot.posts {
        *counts.entry(p.content.as_str()).or_default() += 1;
    }
    let spam: HashSet<&str> = counts.into_iter().filter(|&(_, n)| n > repeat_threshold).map(|(c, _)| c).collect();
    if spam.is_empty() {
        return (snapshot.clone(), SpamReport::default());
    }
    let mut removed_ids = HashSet::new();
    let posts: Vec<PostRecord> = snapshot
        .posts
        .iter()
        .filter(|p| {
            let is_spam = spam.contains(p.content.as_str());
            if is_spam {
                removed_ids.insert(p.id.as_str());
            }
            !is_spam
        })
        .cloned()
        .collect();
    let comments: Vec<CommentRecord> =
        snapshot.comments.iter().filter(|c| !removed_ids.contains(c.post_id.as_str())).cloned().collect();
    let report = SpamReport {
        removed_posts: snapshot.posts.len() - posts.len(),
        removed_comments: snapshot.comments.len() - comments.len(),
    };
    // Ids were unique before filtering, so rebuilding cannot fail.
    let (filtered, _, _) = CorpusSnapshot::build(posts, comments).expect("filtered snapshot stays valid");
    (filtered, report)
}

/// Posts bucketed by UTC calendar day, gap days included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyPartition {
    pub days: Vec<NaiveDate>,
    /// Post positions (into `CorpusSnapshot::posts`) per day.
    pub posts_by_day: Vec<Vec<usize>>,
    /// Day index of every post position.
    pub post_day: Vec<usize>,
}

impl DailyPartition {
    pub fn day_count(&self) -> usize {
        self.days.len()
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.days.first()?;
        let offset = (date - first).num_days();
        usize::try_from(offset).ok().filter(|&i| i < self.days.len())
    }

    pub fn post_ids<'a>(&'a self, snapshot: &'a CorpusSnapshot, day: usize) -> impl Iterator<Item = &'a str> + 'a {
        self.posts_by_day[day].iter().map(move |&i| snapshot.posts[i].id.as_str())
    }
}

pub fn partition_by_day(snapshot: &CorpusSnapshot) -> DailyPartition {
    let (Some(first), Some(last)) = (snapshot.posts.first(), snapshot.posts.last()) else {
        return DailyPartition { days: Vec::new(), posts_by_day: Vec::new(), post_day: Vec::new() };
    };
    let start = first.day();
    let span = (last.day() - start).num_days() as usize + 1;
    let days: Vec<NaiveDate> = start.iter_days().take(span).collect();
    let mut posts_by_day = vec![Vec::new(); span];
    let mut post_day = Vec::with_capacity(snapshot.posts.len());
    for (i, p) in snapshot.posts.iter().enumerate() {
        let d = (p.day() - start).num_days() as usize;
        posts_by_day[d].push(i);
        post_day.push(d);
    }
    DailyPartition { days, posts_by_day, post_day }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroDay {
    pub day: NaiveDate,
    pub post_volume: usize,
    pub unique_posting_users: usize,
    pub new_posting_users: usize,
    pub active_submolts: usize,
    pub posts_per_active_submolt: Option<f64>,
    pub total_comments: usize,
    /// Sum of net scores of the day's posts.
    pub total_upvotes: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroActivitySeries {
    pub days: Vec<MacroDay>,
}

pub fn macro_activity(snapshot: &CorpusSnapshot, partition: &DailyPartition) -> MacroActivitySeries {
    let mut seen_authors: HashSet<&str> = HashSet::new();
    let mut comments_per_day = vec![0usize; partition.day_count()];
    for c in &snapshot.comments {
        if let Some(d) = partition.day_index(c.day()) {
            comments_per_day[d] += 1;
        }
    }
    let days = partition
        .days
        .iter()
        .enumerate()
        .map(|(d, &day)| {
            let posts = &partition.posts_by_day[d];
            let mut authors: HashSet<&str> = HashSet::new();
            let mut submolts: HashSet<&str> = HashSet::new();
            let mut new_users = 0;
            let mut upvotes = 0i64;
            for &i in posts {
                let p = &snapshot.posts[i];
                authors.insert(&p.author);
                submolts.insert(&p.submolt);
                upvotes += p.score;
                if seen_authors.insert(&p.author) {
                    new_users += 1;
                }
            }
            MacroDay {
                day,
                post_volume: posts.len(),
                unique_posting_users: authors.len(),
                new_posting_users: new_users,
                active_submolts: submolts.len(),
                posts_per_active_submolt: (!submolts.is_empty()).then(|| posts.len() as f64 / submolts.len() as f64),
                total_comments: comments_per_day[d],
                total_upvotes: upvotes,
            }
        })
        .collect();
    MacroActivitySeries { days }
}

impl MacroActivitySeries {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "day,post_volume,unique_posting_users,new_posting_users,active_submolts,posts_per_active_submolt,total_comments,total_upvotes"
        )?;
        for d in &self.days {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                d.day,
                d.post_volume,
                d.unique_posting_users,
                d.new_posting_users,
                d.active_submolts,
                csvfmt::opt(d.posts_per_active_submolt),
                d.total_comments,
                d.total_upvotes
            )?;
        }
        Ok(())
    }
}

/// Whole-corpus totals in the shape of the usual dump summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub total_posts: usize,
    pub total_comments: usize,
    pub unique_post_authors: usize,
    pub unique_comment_authors: usize,
    pub posts_with_comments: usize,
    pub avg_comments_per_post: Option<f64>,
}

pub fn summary(snapshot: &CorpusSnapshot) -> CorpusSummary {
    let post_authors: HashSet<&str> = snapshot.posts.iter().map(|p| p.author.as_str()).collect();
    let comment_authors: HashSet<&str> = snapshot.comments.iter().map(|c| c.author.as_str()).collect();
    let commented: HashSet<&str> =
        snapshot.comments.iter().filter(|c| !c.dangling).map(|c| c.post_id.as_str()).collect();
    let attached = snapshot.comments.iter().filter(|c| !c.dangling).count();
    CorpusSummary {
        total_posts: snapshot.posts.len(),
        total_comments: snapshot.comments.len(),
        unique_post_authors: post_authors.len(),
        unique_comment_authors: comment_authors.len(),
        posts_with_comments: commented.len(),
        avg_comments_per_post: (!snapshot.posts.is_empty()).then(|| attached as f64 / snapshot.posts.len() as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post_line(id: &str, author: &str, ts: &str, content: &str) -> String {
        format!(
            r#"{{"id":"{id}","author":"{author}","submolt":"general","created_at":"{ts}","title":"","content":"{content}","score":1}}"#
        )
    }

    fn ingest_str(posts: &str, comments: &str) -> Result<(CorpusSnapshot, IngestReport), CorpusError> {
        ingest(posts.as_bytes(), comments.as_bytes(), &IngestOptions::default())
    }

    #[test]
    fn three_posts_three_authors() {
        let lines = [
            post_line("p1", "a", "2026-01-30T10:00:00Z", "x"),
            post_line("p2", "b", "2026-01-30T11:00:00Z", "y"),
            post_line("p3", "c", "2026-01-31T10:00:00Z", "z"),
        ]
        .join("\n");
        let (snap, report) = ingest_str(&lines, "").unwrap();
        assert_eq!(snap.posts.len(), 3);
        assert_eq!(snap.author_registry.len(), 3);
        assert!(report.malformed.is_empty());
    }

    #[test]
    fn missing_created_at_is_malformed() {
        let mut lines: Vec<String> =
            (0..200).map(|i| post_line(&format!("p{i}"), "a", "2026-01-30T10:00:00Z", "x")).collect();
        lines.push(r#"{"id":"bad","author":"a","submolt":"g","content":"x","score":0}"#.to_string());
        let (snap, report) = ingest_str(&lines.join("\n"), "").unwrap();
        assert_eq!(snap.posts.len(), 200);
        assert_eq!(report.malformed_count("posts"), 1);
        assert!(report.malformed[0].reason.contains("created_at"));
    }

    #[test]
    fn too_many_malformed_is_fatal() {
        let lines = [post_line("p1", "a", "2026-01-30T10:00:00Z", "x"), "not json".to_string()].join("\n");
        assert!(matches!(ingest_str(&lines, ""), Err(CorpusError::TooManyMalformed { .. })));
    }

    #[test]
    fn duplicate_post_id_is_fatal() {
        let lines =
            [post_line("p1", "a", "2026-01-30T10:00:00Z", "x"), post_line("p1", "b", "2026-01-30T11:00:00Z", "y")]
                .join("\n");
        match ingest_str(&lines, "") {
            Err(CorpusError::DuplicatePostId(id)) => assert_eq!(id, "p1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn midnight_boundary_ordering() {
        let lines =
            [post_line("b", "a", "2026-01-31T00:00:00Z", "x"), post_line("a", "a", "2026-01-30T23:59:59Z", "y")]
                .join("\n");
        let (snap, _) = ingest_str(&lines, "").unwrap();
        let ids: Vec<&str> = snap.posts.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        let part = partition_by_day(&snap);
        assert_eq!(part.day_count(), 2);
    }

    #[test]
    fn timestamp_ties_break_by_id() {
        let lines =
            [post_line("z", "a", "2026-01-30T10:00:00Z", "x"), post_line("m", "a", "2026-01-30T10:00:00Z", "y")]
                .join("\n");
        let (snap, _) = ingest_str(&lines, "").unwrap();
        assert_eq!(snap.posts[0].id, "m");
    }

    #[test]
    fn dangling_comments() {
        let posts = post_line("p1", "a", "2026-01-30T10:00:00Z", "x");
        let comments = [
            r#"{"id":"c1","post_id":"p1","author":"b","created_at":"2026-01-30T11:00:00Z","content":"hi"}"#,
            r#"{"id":"c2","post_id":"gone","author":"c","created_at":"2026-01-30T12:00:00Z","content":"?","parent_id":"c1"}"#,
            r#"{"id":"c3","post_id":"gone","author":"d","created_at":"2026-01-30T12:00:00Z","content":"?"}"#,
        ]
        .join("\n");
        let (snap, report) =
            ingest(posts.as_bytes(), comments.as_bytes(), &IngestOptions { max_malformed_fraction: 1.0 }).unwrap();
        assert_eq!(snap.comments.len(), 2);
        assert!(snap.comments[1].dangling);
        assert_eq!(report.dangling_dropped, 1);
        assert_eq!(report.dangling_retained, 1);
        assert!(!snap.author_registry.contains("d"));
    }

    fn snapshot_with_contents(contents: &[(&str, usize)]) -> CorpusSnapshot {
        let mut posts = Vec::new();
        for (c, n) in contents {
            for i in 0..*n {
                posts.push(PostRecord {
                    id: format!("{c}{i:05}"),
                    author: format!("u{}", i % 7),
                    submolt: "general".into(),
                    created_at: timestamp::parse("2026-02-01T00:00:00Z").unwrap(),
                    title: String::new(),
                    content: c.to_string(),
                    score: 0,
                });
            }
        }
        CorpusSnapshot::build(posts, Vec::new()).unwrap().0
    }

    #[test]
    fn spam_filter_strictly_greater() {
        let snap = snapshot_with_contents(&[("A", 1001)]);
        let (out, rep) = apply_spam_filter(&snap, 1000);
        assert_eq!(out.posts.len(), 0);
        assert_eq!(rep.removed_posts, 1001);

        let snap = snapshot_with_contents(&[("A", 1000)]);
        let (out, rep) = apply_spam_filter(&snap, 1000);
        assert_eq!(out, snap);
        assert_eq!(rep.removed_posts, 0);
    }

    #[test]
    fn spam_filter_mixed_and_idempotent() {
        let snap = snapshot_with_contents(&[("A", 1001), ("B", 5)]);
        let (once, rep) = apply_spam_filter(&snap, 1000);
        assert_eq!(rep.removed_posts, 1001);
        assert!(once.posts.iter().all(|p| p.content == "B"));
        assert_eq!(once.posts.len(), 5);
        let (twice, _) = apply_spam_filter(&once, 1000);
        assert_eq!(once, twice);
    }

    #[test]
    fn gap_days_present() {
        let lines =
            [post_line("p1", "a", "2026-01-28T10:00:00Z", "x"), post_line("p2", "b", "2026-01-30T10:00:00Z", "y")]
                .join("\n");
        let (snap, _) = ingest_str(&lines, "").unwrap();
        let part = partition_by_day(&snap);
        assert_eq!(part.day_count(), 3);
        assert!(part.posts_by_day[1].is_empty());
    }

    #[test]
    fn same_day_single_bucket() {
        let lines =
            [post_line("p1", "a", "2026-01-28T01:00:00Z", "x"), post_line("p2", "b", "2026-01-28T23:00:00Z", "y")]
                .join("\n");
        let (snap, _) = ingest_str(&lines, "").unwrap();
        let part = partition_by_day(&snap);
        assert_eq!(part.day_count(), 1);
        assert_eq!(part.post_ids(&snap, 0).collect::<Vec<_>>(), ["p1", "p2"]);
    }

    #[test]
    fn first_post_defines_new_user() {
        let lines =
            [post_line("p1", "a", "2026-01-28T01:00:00Z", "x"), post_line("p2", "a", "2026-01-29T01:00:00Z", "y")]
                .join("\n");
        let (snap, _) = ingest_str(&lines, "").unwrap();
        let part = partition_by_day(&snap);
        let m = macro_activity(&snap, &part);
        let new: Vec<usize> = m.days.iter().map(|d| d.new_posting_users).collect();
        assert_eq!(new, [1, 0]);
    }

    #[test]
    fn round_trip_is_stable() {
        let lines =
            [post_line("p1", "a", "2026-01-28T01:00:00Z", "x"), post_line("p2", "b", "2026-01-29T01:00:00Z", "y")]
                .join("\n");
        let comments = r#"{"id":"c1","post_id":"p1","author":"b","created_at":"2026-01-28T02:00:00Z","content":"hi"}"#;
        let (snap, _) = ingest_str(&lines, comments).unwrap();
        let mut posts = Vec::new();
        let mut cs = Vec::new();
        snap.write_posts(&mut posts).unwrap();
        snap.write_comments(&mut cs).unwrap();
        let (again, _) = ingest(posts.as_slice(), cs.as_slice(), &IngestOptions::default()).unwrap();
        assert_eq!(snap, again);
    }
}
