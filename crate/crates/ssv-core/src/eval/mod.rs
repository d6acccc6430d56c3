//! Verification metrics and score fusion.
//!
//! A *trial* asks whether an enrollment utterance and a test utterance
//! share a speaker. Scoring a trial list against a vector collection
//! gives a [`ScoreSet`]; from labeled score sets this module computes
//! the equal error rate and the minimum detection cost, fuses multiple
//! systems' scores with fixed affine weights, and grid-searches those
//! weights on validation labels.

use thiserror::Error;

mod fusion;
mod io;
mod metrics;
mod score;
mod types;

pub use fusion::{fuse_scores, min_max_normalize, tune_fusion, FusionCell, FusionSurface};
pub use io::{attach_labels, read_scores, read_trials, write_metrics, write_scores, write_trials};
pub use metrics::{compute_eer, compute_min_dcf, dcf_at_threshold, eer_from_scores, min_dcf_from_scores};
pub use score::score_trials;
pub use types::{DcfParams, FusionWeights, MetricsReport, ScoreSet, Trial};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trial {index} ({enroll}, {test}) has no label")]
    Unlabeled {
        index: usize,
        enroll: String,
        test: String,
    },

    #[error("need both classes: {targets} target and {nontargets} nontarget trials")]
    SingleClass { targets: usize, nontargets: usize },

    #[error("score sets disagree at trial {index}: ({left}) vs ({right})")]
    TrialMismatch {
        index: usize,
        left: String,
        right: String,
    },

    #[error("score sets have {left} vs {right} trials")]
    LengthMismatch { left: usize, right: usize },

    #[error("trial {index} references unknown id '{id}'")]
    UnknownId { index: usize, id: String },

    #[error("bad fusion weights: {0}")]
    BadWeights(String),

    #[error("bad detection cost parameters: {0}")]
    BadParams(String),

    #[error("scores are degenerate: {0}")]
    DegenerateScores(String),

    #[error("non-finite score: {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {detail}")]
    BadRecord {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("nothing to evaluate: {0}")]
    EmptyInput(String),

    #[error(transparent)]
    Vector(#[from] crate::vectorspace::VectorError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
