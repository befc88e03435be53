//! Daily interaction graphs, PageRank concentration, supernode detection,
//! supernode persistence and degree rankings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, Write};

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::corpus::{CorpusSnapshot, DailyPartition};
use crate::csvfmt;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOPK: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraphError {
    #[error("graph for {0} has no nodes")]
    EmptyGraph(NaiveDate),
    #[error("PageRank did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("damping must lie in [0, 1), got {0}")]
    BadDamping(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphMode {
    Independent,
    Cumulative,
}

impl GraphMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphMode::Independent => "independent",
            GraphMode::Cumulative => "cumulative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: u64,
}

/// Weighted directed commenter -> recipient graph for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyGraph {
    pub day: NaiveDate,
    pub mode: GraphMode,
    /// Agent ids, sorted.
    pub nodes: Vec<String>,
    /// Sorted by (src, dst); weights >= 1, no self-loops.
    pub edges: Vec<Edge>,
}

impl DailyGraph {
    pub fn from_weights(day: NaiveDate, mode: GraphMode, weights: &BTreeMap<(String, String), u64>) -> Self {
        let nodes: Vec<String> =
            weights.keys().flat_map(|(a, b)| [a, b]).collect::<BTreeSet<_>>().into_iter().cloned().collect();
        let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut edges: Vec<Edge> = weights
            .iter()
            .map(|((a, b), &w)| Edge { src: index[a.as_str()], dst: index[b.as_str()], weight: w })
            .collect();
        edges.sort_by_key(|e| (e.src, e.dst));
        DailyGraph { day, mode, nodes, edges }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphBuildReport {
    /// Comments whose recipient could not be resolved.
    pub unresolved: usize,
    pub self_loops: usize,
    /// Comments dated outside the partition's day range.
    pub out_of_range: usize,
}

/// Builds one graph per partition day. A reply to a known comment points
/// to that comment's author; otherwise the edge points to the post author.
pub fn build_graphs(
    snapshot: &CorpusSnapshot,
    partition: &DailyPartition,
    mode: GraphMode,
) -> (Vec<DailyGraph>, GraphBuildReport) {
    let comment_author: HashMap<&str, &str> =
        snapshot.comments.iter().map(|c| (c.id.as_str(), c.author.as_str())).collect();
    let mut report = GraphBuildReport::default();
    let mut per_day: Vec<BTreeMap<(String, String), u64>> = vec![BTreeMap::new(); partition.day_count()];
    for c in &snapshot.comments {
        let recipient = c
            .parent_id
            .as_deref()
            .and_then(|p| comment_author.get(p).copied())
            .or_else(|| snapshot.post(&c.post_id).map(|p| p.author.as_str()));
        let Some(recipient) = recipient else {
            report.unresolved += 1;
            continue;
        };
        if recipient == c.author {
            report.self_loops += 1;
            continue;
        }
        let Some(day) = partition.day_index(c.day()) else {
            report.out_of_range += 1;
            continue;
        };
        *per_day[day].entry((c.author.clone(), recipient.to_string())).or_default() += 1;
    }
    let graphs = match mode {
        GraphMode::Independent => {
            per_day.iter().zip(&partition.days).map(|(w, &day)| DailyGraph::from_weights(day, mode, w)).collect()
        }
        GraphMode::Cumulative => {
            let mut running: BTreeMap<(String, String), u64> = BTreeMap::new();
            per_day
                .into_iter()
                .zip(&partition.days)
                .map(|(w, &day)| {
                    for (k, v) in w {
                        *running.entry(k).or_default() += v;
                    }
                    DailyGraph::from_weights(day, mode, &running)
                })
                .collect()
        }
    };
    (graphs, report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig { damping: DEFAULT_DAMPING, tolerance: DEFAULT_TOLERANCE, max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankResult {
    pub day: NaiveDate,
    pub nodes: Vec<String>,
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl PageRankResult {
    pub fn score(&self, agent: &str) -> Option<f64> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(agent)).ok().map(|i| self.scores[i])
    }

    /// Node indices by descending score, ties by agent id.
    pub fn ranked(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| {
            self.scores[b].total_cmp(&self.scores[a]).then_with(|| self.nodes[a].cmp(&self.nodes[b]))
        });
        order
    }
}

/// Weighted PageRank by power iteration: transitions proportional to
/// out-weight, uniform teleport, dangling mass spread uniformly; stops once
/// the L1 change drops below the tolerance.
pub fn pagerank(graph: &DailyGraph, config: PageRankConfig) -> Result<PageRankResult, GraphError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(GraphError::EmptyGraph(graph.day));
    }
    if !(0.0..1.0).contains(&config.damping) {
        return Err(GraphError::BadDamping(config.damping));
    }
    let d = config.damping;
    let nf = n as f64;
    let mut out_weight = vec![0.0f64; n];
    for e in &graph.edges {
        out_weight[e.src] += e.weight as f64;
    }
    let mut scores = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iter {
        let dangling: f64 = (0..n).filter(|&i| out_weight[i] == 0.0).map(|i| scores[i]).sum();
        next.fill((1.0 - d) / nf + d * dangling / nf);
        for e in &graph.edges {
            next[e.dst] += d * scores[e.src] * e.weight as f64 / out_weight[e.src];
        }
        residual = scores.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut scores, &mut next);
        if residual < config.tolerance {
            return Ok(PageRankResult { day: graph.day, nodes: graph.nodes.clone(), scores, iterations: it, residual });
        }
    }
    Err(GraphError::NoConvergence { iterations: config.max_iter, residual })
}

/// Sum of the `k` largest scores for each requested `k` (capped at the node
/// count).
pub fn topk_mass(result: &PageRankResult, ks: &[usize]) -> Vec<(usize, f64)> {
    let ranked = result.ranked();
    ks.iter().map(|&k| (k, ranked.iter().take(k).map(|&i| result.scores[i]).sum())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupernodeReport {
    pub day: NaiveDate,
    pub k_star: usize,
    /// Top-`k_star` agents by descending score.
    pub members: Vec<String>,
    pub max_gap: f64,
    /// Every 1-based position attaining the maximum gap.
    pub tied_positions: Vec<usize>,
}

/// Largest consecutive gap in the descending score list; the agents above
/// it are the supernodes. Ties resolve to the smallest position.
pub fn detect_supernodes(result: &PageRankResult) -> Option<SupernodeReport> {
    if result.nodes.len() < 2 {
        return None;
    }
    let ranked = result.ranked();
    let gaps: Vec<f64> = ranked.windows(2).map(|w| result.scores[w[0]] - result.scores[w[1]]).collect();
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied_positions: Vec<usize> =
        gaps.iter().enumerate().filter(|(_, &g)| g == max_gap).map(|(i, _)| i + 1).collect();
    let k_star = tied_positions[0];
    Some(SupernodeReport {
        day: result.day,
        k_star,
        members: ranked[..k_star].iter().map(|&i| result.nodes[i].clone()).collect(),
        max_gap,
        tied_positions,
    })
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// Jaccard similarity of consecutive days' supernode sets; a link is
/// absent when either day has no report.
pub fn persistence(reports: &[Option<SupernodeReport>]) -> Vec<Option<f64>> {
    reports
        .windows(2)
        .map(|w| match (&w[0], &w[1]) {
            (Some(a), Some(b)) => {
                let sa: BTreeSet<&str> = a.members.iter().map(String::as_str).collect();
                let sb: BTreeSet<&str> = b.members.iter().map(String::as_str).collect();
                Some(jaccard(&sa, &sb))
            }
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeTables {
    /// Most commented-on agents (weighted in-degree).
    pub in_degree: Vec<(String, u64)>,
    /// Most active commenters (weighted out-degree).
    pub out_degree: Vec<(String, u64)>,
}

pub fn degree_tables(graph: &DailyGraph, top_n: usize) -> DegreeTables {
    let mut inw = vec![0u64; graph.node_count()];
    let mut outw = vec![0u64; graph.node_count()];
    for e in &graph.edges {
        inw[e.dst] += e.weight;
        outw[e.src] += e.weight;
    }
    let rank = |w: &[u64]| {
        let mut v: Vec<(String, u64)> =
            graph.nodes.iter().cloned().zip(w.iter().copied()).filter(|(_, x)| *x > 0).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(top_n);
        v
    };
    DegreeTables { in_degree: rank(&inw), out_degree: rank(&outw) }
}

/// Everything computed for one day's graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DayAnalysis {
    pub day: NaiveDate,
    pub nodes: usize,
    pub edges: usize,
    pub total_weight: u64,
    pub pagerank: Option<PageRankResult>,
    pub topk: Vec<(usize, f64)>,
    pub supernodes: Option<SupernodeReport>,
}

/// Per-day concentration and persistence for one graph mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationSeries {
    pub mode: GraphMode,
    pub days: Vec<DayAnalysis>,
    /// Jaccard of day t-1 vs day t, aligned with `days[1..]`.
    pub persistence: Vec<Option<f64>>,
    pub degrees: DegreeTables,
}

impl ConcentrationSeries {
    pub fn mean_persistence(&self) -> Option<f64> {
        let v: Vec<f64> = self.persistence.iter().flatten().copied().collect();
        crate::stats::mean(&v)
    }
}

pub fn analyze(
    graphs: &[DailyGraph],
    config: PageRankConfig,
    ks: &[usize],
    top_n: usize,
) -> Result<ConcentrationSeries, GraphError> {
    let days: Vec<DayAnalysis> = graphs
        .par_iter()
        .map(|g| {
            let pr = if g.node_count() == 0 { None } else { Some(pagerank(g, config)?) };
            let topk = pr.as_ref().map(|p| topk_mass(p, ks)).unwrap_or_default();
            let supernodes = pr.as_ref().and_then(detect_supernodes);
            Ok(DayAnalysis {
                day: g.day,
                nodes: g.node_count(),
                edges: g.edge_count(),
                total_weight: g.total_weight(),
                pagerank: pr,
                topk,
                supernodes,
            })
        })
        .collect::<Result<_, GraphError>>()?;
    let reports: Vec<Option<SupernodeReport>> = days.iter().map(|d| d.supernodes.clone()).collect();
    let mode = graphs.first().map_or(GraphMode::Independent, |g| g.mode);
    let degrees = match graphs.last() {
        Some(last) if mode == GraphMode::Cumulative => degree_tables(last, top_n),
        _ => {
            // Aggregate over the whole period for independent graphs.
            let mut total: BTreeMap<(String, String), u64> = BTreeMap::new();
            for g in graphs {
                for e in &g.edges {
                    *total.entry((g.nodes[e.src].clone(), g.nodes[e.dst].clone())).or_default() += e.weight;
                }
            }
            let day = graphs.last().map_or(NaiveDate::MIN, |g| g.day);
            degree_tables(&DailyGraph::from_weights(day, mode, &total), top_n)
        }
    };
    Ok(ConcentrationSeries { mode, persistence: persistence(&reports), days, degrees })
}

impl ConcentrationSeries {
    pub fn write_pagerank_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "day,agent,pagerank")?;
        for d in &self.days {
            if let Some(pr) = &d.pagerank {
                for i in pr.ranked() {
                    writeln!(w, "{},{},{}", d.day, csvfmt::field(&pr.nodes[i]), csvfmt::num(pr.scores[i]))?;
                }
            }
        }
        Ok(())
    }

    pub fn write_topk_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "day,k,mass")?;
        for d in &self.days {
            for (k, m) in &d.topk {
                writeln!(w, "{},{k},{}", d.day, csvfmt::num(*m))?;
            }
        }
        Ok(())
    }

    pub fn write_supernodes_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "day,k_star,max_gap,tied_positions,members")?;
        for d in &self.days {
            if let Some(s) = &d.supernodes {
                let ties: Vec<String> = s.tied_positions.iter().map(|t| t.to_string()).collect();
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    d.day,
                    s.k_star,
                    csvfmt::num(s.max_gap),
                    ties.join(";"),
                    csvfmt::field(&s.members.join(";"))
                )?;
            }
        }
        Ok(())
    }

    pub fn write_persistence_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "from,to,jaccard")?;
        for (i, j) in self.persistence.iter().enumerate() {
            writeln!(w, "{},{},{}", self.days[i].day, self.days[i + 1].day, csvfmt::opt(*j))?;
        }
        Ok(())
    }

    pub fn write_degrees_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "table,rank,agent,weight")?;
        for (name, rows) in [("in", &self.degrees.in_degree), ("out", &self.degrees.out_degree)] {
            for (i, (a, x)) in rows.iter().enumerate() {
                writeln!(w, "{name},{},{},{x}", i + 1, csvfmt::field(a))?;
            }
        }
        Ok(())
    }

    pub fn write_stats_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "period,nodes,edges,total_weight")?;
        for d in &self.days {
            writeln!(w, "{},{},{},{}", d.day, d.nodes, d.edges, d.total_weight)?;
        }
        Ok(())
    }
}
