//! Self-supervised speaker verification.
//!
//! The crate covers the full experiment loop with no labeled training data:
//! mel-spectrogram features over synthetic audio, cosine-space mining of
//! client/impostor pairs from a reference vector space, a nearest-neighbor
//! autoencoder, VGG-style siamese encoders with self-attention pooling, and
//! EER/minDCF evaluation with two-stage score fusion.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`nncore`]: tensors, layers, losses, optimizers, gradient checking
//! - [`vectorspace`]: cosine similarity, neighborhoods, pair/triplet mining
//! - [`features`]: WAV parsing, mel spectrograms, crops, synthetic corpora
//! - [`autoencoder`]: the nearest-neighbor autoencoder and ae-vectors
//! - [`siamese`]: double- and triple-branch verification networks
//! - [`eval`]: trials, EER, minimum DCF, score fusion

pub mod autoencoder;
pub mod eval;
pub mod features;
pub mod nncore;
pub mod siamese;
pub mod vectorspace;
