//! Siamese verification networks over mel-spectrogram crops.
//!
//! Two models share one convolutional encoder design:
//!
//! * [`DoubleBranchModel`] — two weight-shared branches whose embeddings
//!   are concatenated and pushed through a small fully connected head
//!   ending in a sigmoid. Trained as a binary same/different classifier
//!   on mined pairs, its output is itself the verification score.
//! * [`TripleBranchModel`] — three weight-shared branches emitting
//!   l2-normalized embeddings, trained with a triplet hinge on mined
//!   (anchor, client, impostor) triples. Verification scores come from
//!   cosine comparison of extracted embeddings.
//!
//! "Weight-shared" is structural here: each model owns exactly one
//! [`EncoderModel`] and runs every branch through it, so the branches
//! cannot drift apart.

use thiserror::Error;

mod double;
mod encoder;
mod extract;
mod profile;
mod train;
mod triple;

pub use double::{default_head, DoubleBranchModel};
pub use encoder::{EncoderCache, EncoderModel, ShapeTrace};
pub use extract::{extract_embeddings, score_trials_double};
pub use profile::EncoderProfile;
pub use train::{train_double, train_triple, SiameseTrainConfig, TripleHistory};
pub use triple::TripleBranchModel;

use crate::nncore::NnError;

#[derive(Debug, Error)]
pub enum SiameseError {
    #[error("bad model or training configuration: {0}")]
    BadConfig(String),

    #[error("input has {got} mel bins but the encoder expects {expected}")]
    BinMismatch { expected: usize, got: usize },

    #[error("input of {frames} frames is too short; {min} needed to survive pooling")]
    TooShort { frames: usize, min: usize },

    #[error("no features cached for utterance '{0}'")]
    MissingFeatures(String),

    #[error("nothing to train on: {0}")]
    EmptyInput(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error(transparent)]
    Nn(#[from] NnError),

    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}
