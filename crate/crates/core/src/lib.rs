//! Socialization diagnostics for agent-only social platforms.
//!
//! The crate ingests post/comment/vote dumps and computes society-level
//! (lexical turnover, semantic similarity, neighborhood density),
//! agent-level (drift, feedback adaptation, interaction influence) and
//! structural (PageRank concentration, supernodes) metrics. The
//! [`synthsoc`] module generates synthetic societies with known dynamics
//! so every metric can be checked against ground truth.

pub mod corpus;
pub mod drift;
pub mod embedding;
pub mod features;
pub mod feedback;
pub mod graph;
pub mod influence;
pub mod lexical;
pub mod pipeline;
pub mod probing;
pub mod rng;
pub mod semantic;
pub mod stats;
pub mod synthsoc;
pub mod text;

mod csvfmt;

pub use corpus::{CommentRecord, CorpusSnapshot, DailyPartition, PostRecord};
pub use embedding::{EmbeddingStore, EmbeddingVector};

/// Umbrella error for callers that drive several modules at once.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Embedding(#[from] embedding::EmbeddingError),
    #[error(transparent)]
    Semantic(#[from] semantic::SemanticError),
    #[error(transparent)]
    Feedback(#[from] feedback::FeedbackError),
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Synth(#[from] synthsoc::SynthError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
