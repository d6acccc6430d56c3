//! Training loops for the two siamese models.
//!
//! Both loops follow the same scheme: reshuffle the mined pairs or
//! triplets each epoch, draw a fresh random crop for every sample, run
//! each branch through the shared encoder, average gradients over the
//! mini-batch, and take an Adam step. Everything is driven by one seeded
//! generator, so a (config, inputs) pair maps to exactly one training
//! trajectory.

use std::collections::BTreeMap;

use super::{DoubleBranchModel, SiameseError, TripleBranchModel};
use crate::features::{random_crop_with_rng, MelSpectrogram};
use crate::nncore::{bce_loss, optimizer_step, Net, OptimizerConfig, Tensor};
use crate::vectorspace::{Pair, Triplet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiameseTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Crop length in frames; every training input is exactly this wide.
    pub crop_frames: usize,
    /// Adam learning rate.
    pub lr: f64,
    pub seed: u64,
    /// Triplet hinge margin (triple-branch only).
    pub margin: f64,
    /// Neighborhood size used when the pairs were mined; carried along
    /// for provenance in reports and sidecars.
    pub mining_k: usize,
}

impl Default for SiameseTrainConfig {
    fn default() -> Self {
        SiameseTrainConfig {
            epochs: 10,
            batch_size: 32,
            crop_frames: 350,
            lr: 1e-3,
            seed: 0,
            margin: 0.2,
            mining_k: 10,
        }
    }
}

impl SiameseTrainConfig {
    fn validate(&self) -> Result<(), SiameseError> {
        if self.epochs == 0 || self.batch_size == 0 || self.crop_frames == 0 {
            return Err(SiameseError::BadConfig(
                "epochs, batch_size, and crop_frames must be >= 1".into(),
            ));
        }
        if self.lr < 0.0 || !self.lr.is_finite() {
            return Err(SiameseError::BadConfig(format!("bad learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// Per-epoch mean triplet loss plus the fraction of triplets whose hinge
/// was active (loss > 0) that epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleHistory {
    pub epoch_loss: Vec<f64>,
    pub active_fraction: Vec<f64>,
}

fn crop(
    features: &BTreeMap<String, MelSpectrogram>,
    id: &str,
    frames: usize,
    rng: &mut impl Rng,
) -> Result<Tensor, SiameseError> {
    let spec = features
        .get(id)
        .ok_or_else(|| SiameseError::MissingFeatures(id.to_string()))?;
    Ok(random_crop_with_rng(spec, frames, rng))
}

fn require_ids<'a>(
    features: &BTreeMap<String, MelSpectrogram>,
    mut ids: impl Iterator<Item = &'a str>,
) -> Result<(), SiameseError> {
    match ids.find(|id| !features.contains_key(*id)) {
        Some(missing) => Err(SiameseError::MissingFeatures(missing.to_string())),
        None => Ok(()),
    }
}

/// Trains the double-branch classifier on labeled pairs with binary
/// cross entropy; returns the per-epoch mean loss.
pub fn train_double(
    model: &mut DoubleBranchModel,
    pairs: &[Pair],
    features: &BTreeMap<String, MelSpectrogram>,
    config: &SiameseTrainConfig,
) -> Result<Vec<f64>, SiameseError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(SiameseError::EmptyInput("no training pairs".into()));
    }
    require_ids(
        features,
        pairs
            .iter()
            .flat_map(|p| [p.anchor.as_str(), p.other.as_str()]),
    )?;

    let opt = OptimizerConfig::adam(config.lr);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    // Per-sample losses keyed by pair index so the epoch mean is summed
    // in a fixed order, independent of the shuffle.
    let mut sample_loss = vec![0.0; pairs.len()];
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            model.zero_grads();
            for &pi in chunk {
                let pair = &pairs[pi];
                let a = crop(features, &pair.anchor, config.crop_frames, &mut rng)?;
                let b = crop(features, &pair.other, config.crop_frames, &mut rng)?;
                let cache = model.forward_cached(&a, &b)?;
                let label = f64::from(pair.label);
                let loss = bce_loss(cache.score, label);
                if !loss.is_finite() {
                    return Err(SiameseError::NonFinite {
                        epoch,
                        batch: batch_idx,
                        detail: format!("pair ({}, {}) loss {loss}", pair.anchor, pair.other),
                    });
                }
                sample_loss[pi] = loss;
                model.backward(&cache, cache.score - label)?;
            }
            model.scale_grads(1.0 / chunk.len() as f64);
            optimizer_step(model, &opt, step)?;
            step += 1;
        }
        history.push(sample_loss.iter().sum::<f64>() / pairs.len() as f64);
    }
    Ok(history)
}

/// Trains the triple-branch model on mined triplets; returns loss and
/// active-hinge histories.
pub fn train_triple(
    model: &mut TripleBranchModel,
    triplets: &[Triplet],
    features: &BTreeMap<String, MelSpectrogram>,
    config: &SiameseTrainConfig,
) -> Result<TripleHistory, SiameseError> {
    config.validate()?;
    if triplets.is_empty() {
        return Err(SiameseError::EmptyInput("no training triplets".into()));
    }
    require_ids(
        features,
        triplets
            .iter()
            .flat_map(|t| [t.anchor.as_str(), t.client.as_str(), t.impostor.as_str()]),
    )?;

    let opt = OptimizerConfig::adam(config.lr);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut sample_loss = vec![0.0; triplets.len()];
    let mut history = TripleHistory {
        epoch_loss: Vec::with_capacity(config.epochs),
        active_fraction: Vec::with_capacity(config.epochs),
    };
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            model.zero_grads();
            for &ti in chunk {
                let t = &triplets[ti];
                let a = crop(features, &t.anchor, config.crop_frames, &mut rng)?;
                let c = crop(features, &t.client, config.crop_frames, &mut rng)?;
                let i = crop(features, &t.impostor, config.crop_frames, &mut rng)?;
                let cache = model.forward_cached(&a, &c, &i)?;
                if !cache.loss.is_finite() {
                    return Err(SiameseError::NonFinite {
                        epoch,
                        batch: batch_idx,
                        detail: format!("triplet anchored at {} loss {}", t.anchor, cache.loss),
                    });
                }
                sample_loss[ti] = cache.loss;
                model.backward(&cache)?;
            }
            model.scale_grads(1.0 / chunk.len() as f64);
            optimizer_step(model, &opt, step)?;
            step += 1;
        }
        history
            .epoch_loss
            .push(sample_loss.iter().sum::<f64>() / triplets.len() as f64);
        history.active_fraction.push(
            sample_loss.iter().filter(|&&l| l > 0.0).count() as f64 / triplets.len() as f64,
        );
    }
    Ok(history)
}
