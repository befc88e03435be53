//! `sociometry` command-line front end.
//!
//! Every subcommand stages its outputs in memory and commits them with
//! write-then-rename, together with a `manifest.json` recording input
//! hashes and parameters. Exit codes: 0 success, 1 usage error, 2 data
//! error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod output;
mod report;
mod sections;

pub use output::{Manifest, ManifestEntry};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub(crate) fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(
    name = "sociometry",
    version,
    about = "Socialization diagnostics for agent-only social platforms",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Worker threads; defaults to the available cores. Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    /// Posts file (JSON lines).
    #[arg(long)]
    pub posts: PathBuf,
    /// Comments file (JSON lines).
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Drop posts whose exact content repeats more than this many times
    /// (0 disables the filter).
    #[arg(long, default_value_t = sociometry::corpus::DEFAULT_SPAM_THRESHOLD)]
    pub spam_threshold: usize,
    /// Tolerated fraction of malformed lines per input file.
    #[arg(long, default_value_t = sociometry::corpus::DEFAULT_MAX_MALFORMED)]
    pub max_malformed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Mbem,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmbedArgs {
    /// Embedding store; without it a deterministic hashing encoder is used.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mbem")]
    pub format: Format,
    /// Dimension of the fallback encoder.
    #[arg(long, default_value_t = sociometry::embedding::DEFAULT_DIM)]
    pub fallback_dim: usize,
    /// Skip posts without an embedding instead of failing.
    #[arg(long)]
    pub allow_missing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Features {
    Semantic,
    Syntactic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticMetric {
    Centroid,
    Pairwise,
    Density,
    Jsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Independent,
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeArg {
    InertTurnover,
    Convergent,
    FeedbackAdaptive,
    Hierarchical,
    Egalitarian,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Validate and normalize a dump; writes cleaned JSON lines and a report.
    Ingest {
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus totals and daily macro activity.
    Stats {
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "stats")]
        out: PathBuf,
    },
    /// N-gram birth and death rates.
    Lexical {
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = sociometry::lexical::MAX_N)]
        n_max: usize,
        #[arg(long, default_value_t = 2)]
        min_freq: u64,
        #[arg(long, default_value = "lexical")]
        out: PathBuf,
    },
    /// Daily centroid and pairwise similarity, local density and its shift.
    Semantic {
        /// Compute one metric only (default: all).
        #[arg(value_enum)]
        metric: Option<SemanticMetric>,
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        #[serde(flatten)]
        embed: EmbedArgs,
        #[arg(long, default_value_t = sociometry::semantic::DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = sociometry::semantic::DEFAULT_BINS)]
        bins: usize,
        #[arg(long, default_value = "semantic")]
        out: PathBuf,
    },
    /// Agent-level drift between early and late halves.
    Drift {
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        #[serde(flatten)]
        embed: EmbedArgs,
        #[arg(long, default_value_t = sociometry::drift::DEFAULT_MIN_POSTS)]
        min_posts: usize,
        /// Activity bucket edges (posts per agent).
        #[arg(long, value_delimiter = ',', default_value = "10,20,50,100")]
        buckets: Vec<usize>,
        /// Measure consistency against the other agents' mean drift.
        #[arg(long)]
        leave_one_out: bool,
        #[arg(long, default_value = "drift")]
        out: PathBuf,
    },
    /// Net Progress toward high-feedback content with a permutation baseline.
    Feedback {
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        #[serde(flatten)]
        embed: EmbedArgs,
        #[arg(long, visible_alias = "w", default_value_t = sociometry::feedback::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = sociometry::feedback::DEFAULT_QUANTILE)]
        quantile: f64,
        /// Score shuffles per window pair.
        #[arg(long, visible_alias = "perms", default_value_t = 1)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "semantic,syntactic")]
        features: Vec<Features>,
        #[arg(long, default_value = "feedback")]
        out: PathBuf,
    },
    /// Interaction influence with a same-day random baseline.
    Influence {
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        #[serde(flatten)]
        embed: EmbedArgs,
        #[arg(long, visible_alias = "w", default_value_t = sociometry::influence::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = sociometry::influence::DEFAULT_SAMPLE_PROB)]
        sample_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "semantic,syntactic")]
        features: Vec<Features>,
        #[arg(long, default_value = "influence")]
        out: PathBuf,
    },
    /// Interaction graphs, PageRank concentration and supernodes.
    Graph {
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value = "independent")]
        mode: Mode,
        #[arg(long, default_value_t = sociometry::graph::DEFAULT_DAMPING)]
        damping: f64,
        #[arg(long, default_value_t = sociometry::graph::DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = sociometry::graph::DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        topk: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long, default_value = "graph")]
        out: PathBuf,
    },
    /// Cognitive probe catalog and response classification.
    Probes {
        #[command(subcommand)]
        action: ProbesCommand,
    },
    /// Generate a synthetic society.
    Simulate {
        #[arg(long, value_enum)]
        regime: RegimeArg,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        posts_per_day: Option<f64>,
        #[arg(long)]
        comments_per_day: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combined summary and plot-ready CSVs.
    Report {
        /// A directory of module outputs, or a dump/society directory holding
        /// posts.jsonl (then every module is run).
        #[arg(long)]
        dir: PathBuf,
        /// Defaults to `<dir>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, visible_alias = "perms", default_value_t = 1)]
        permutations: usize,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbesCommand {
    /// Write the 45-probe catalog.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify comments left under probes.
    Classify {
        #[arg(long)]
        probes: PathBuf,
        /// Comment records with an added `probe_id` field.
        #[arg(long)]
        responses: PathBuf,
        /// Corpus used to resolve referenced users and posts; without it
        /// every reference is invalid.
        #[arg(long)]
        posts: Option<PathBuf>,
        #[arg(long)]
        comments: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| commands::execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
