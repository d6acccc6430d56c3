//! The nearest-neighbor autoencoder and its ae-vectors.
//!
//! A fully connected autoencoder is trained to reconstruct each vector's
//! cosine neighbors rather than the vector itself, so the bottleneck
//! learns what a neighborhood shares (the speaker) instead of memorizing
//! utterance detail. Passing test vectors through the trained model
//! yields "ae-vectors", scored downstream exactly like the originals.

mod model;
mod pairs;
mod train;

pub use model::AEModel;
pub use pairs::build_training_pairs;
pub use train::{extract_ae_vectors, train_ae, AETrainConfig};

use crate::nncore::NnError;
use crate::vectorspace::VectorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AeError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("vector dim {got} does not match model dim {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("empty input: {0}")]
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
    Vector(#[from] VectorError),
}
