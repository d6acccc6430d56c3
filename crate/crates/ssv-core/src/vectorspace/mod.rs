//! Cosine scoring over speaker vectors and self-supervised mining.
//!
//! Given a collection of per-utterance vectors (i-vectors or learned
//! embeddings), this module scores them against each other, extracts
//! nearest neighbors, and mines client/impostor pairs and triplets from
//! two disjoint subsets - all without speaker labels. Labels, when a
//! corpus has them, are used only to split subsets and to audit purity.

mod io;
mod mine;
mod score;
mod split;
mod types;

pub use io::{
    read_pairs, read_triplets, read_vectors, write_pairs, write_triplets, write_vectors,
};
pub use mine::{build_pairs_and_triplets, mine_all, mine_clients, mine_impostors, purity_stats};
pub use score::{cosine_score, top_k_neighbors};
pub use split::split_subsets;
pub use types::{
    validate_collection, ImpostorRule, MinedAnchor, MiningArtifacts, MiningConfig, MiningReport,
    Pair, PurityStats, SpeakerVector, SubsetSplit, Triplet,
};

use thiserror::Error;

/// Errors from vector scoring, mining, splitting, and the file formats.
#[derive(Debug, Error)]
pub enum VectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero vector: {0}")]
    ZeroVector(String),
    #[error("non-finite value in vector {0}")]
    NonFinite(String),
    #[error("pool has {available} candidates, need {requested}")]
    PoolTooSmall { requested: usize, available: usize },
    #[error("unknown utterance id {0:?}")]
    UnknownId(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("id {0:?} contains whitespace; ids must be single tokens")]
    BadId(String),
    #[error("{path}:{line}: {detail}")]
    BadRecord {
        path: String,
        line: usize,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
