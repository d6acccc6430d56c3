//! Autoencoder training and ae-vector extraction.

use super::model::AEModel;
use super::AeError;
use crate::nncore::{
    ensure_finite_grads, mse_loss, optimizer_step, DecayKind, Net, OptimizerConfig,
    OptimizerKind, Tensor,
};
use crate::vectorspace::SpeakerVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Training hyperparameters. Defaults are the reference recipe: 100
/// epochs of SGD at lr 0.01 with inverse-time decay 0.0002, mini-batches
/// of 100, and 15 neighbors per anchor. That recipe assumes corpus-scale
/// pair counts; small runs converge much faster with `optimizer: adam`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AETrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub neighbor_k: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Hidden layer sizes, mirrored around the bottleneck.
    pub hidden: Vec<usize>,
    /// Scale vectors to unit norm before training and extraction.
    pub length_normalize: bool,
}

impl Default for AETrainConfig {
    fn default() -> Self {
        AETrainConfig {
            epochs: 100,
            lr: 0.01,
            lr_decay: 0.0002,
            batch_size: 100,
            neighbor_k: 15,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
            hidden: vec![300, 200, 300],
            length_normalize: false,
        }
    }
}

impl AETrainConfig {
    fn validate(&self) -> Result<(), AeError> {
        if self.epochs == 0 || self.batch_size == 0 || self.neighbor_k == 0 {
            return Err(AeError::BadConfig(
                "epochs, batch_size, and neighbor_k must be >= 1".into(),
            ));
        }
        let lr_ok = self.lr.is_finite() && self.lr >= 0.0;
        let decay_ok = self.lr_decay.is_finite() && self.lr_decay >= 0.0;
        if !lr_ok || !decay_ok {
            return Err(AeError::BadConfig(
                "learning rate and decay must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn maybe_normalize(values: &[f64], normalize: bool) -> Vec<f64> {
    if !normalize {
        return values.to_vec();
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return values.to_vec();
    }
    values.iter().map(|v| v / norm).collect()
}

/// Trains an autoencoder on `(input, target)` index pairs over `vectors`.
///
/// Returns the model and the per-epoch mean MSE history. Pairs are
/// reshuffled every epoch from the config seed, so identical inputs give
/// bitwise-identical histories.
pub fn train_ae(
    vectors: &[SpeakerVector],
    pairs: &[(usize, usize)],
    config: &AETrainConfig,
) -> Result<(AEModel, Vec<f64>), AeError> {
    config.validate()?;
    if vectors.is_empty() || pairs.is_empty() {
        return Err(AeError::EmptyInput("no vectors or pairs to train on".into()));
    }
    if let Some(&(a, t)) = pairs.iter().find(|&&(a, t)| a >= vectors.len() || t >= vectors.len()) {
        return Err(AeError::BadConfig(format!(
            "pair ({a}, {t}) indexes past the {} vectors",
            vectors.len()
        )));
    }
    let dim = vectors[0].values.len();

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut model = AEModel::new(dim, &config.hidden, &mut rng)?;
    let opt = OptimizerConfig::sgd(config.lr, config.lr_decay);

    let prepared: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| maybe_normalize(&v.values, config.length_normalize))
        .collect();

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let b = chunk.len();
            let mut inputs = Vec::with_capacity(b * dim);
            let mut targets = Vec::with_capacity(b * dim);
            for &pi in chunk {
                let (a, t) = pairs[pi];
                inputs.extend_from_slice(&prepared[a]);
                targets.extend_from_slice(&prepared[t]);
            }
            let inputs = Tensor::from_vec(&[b, dim], inputs)?;
            let targets = Tensor::from_vec(&[b, dim], targets)?;

            let (layer_inputs, pre, output) = model.forward_cached(&inputs)?;
            let loss = mse_loss(&output, &targets)?;
            if !loss.is_finite() {
                return Err(AeError::NonFinite {
                    epoch,
                    batch: batch_idx,
                    detail: format!("batch loss {loss}"),
                });
            }
            loss_sum += loss * b as f64;

            model.zero_grads();
            model.backward(&layer_inputs, &pre, &output, &targets)?;
            ensure_finite_grads(&model).map_err(|e| AeError::NonFinite {
                epoch,
                batch: batch_idx,
                detail: e.to_string(),
            })?;
            optimizer_step(&mut model, &opt, step)?;
            step += 1;
        }
        history.push(loss_sum / pairs.len() as f64);
    }
    Ok((model, history))
}

/// Runs vectors through the trained model; ids and order are preserved.
/// `length_normalize` must match what training used.
pub fn extract_ae_vectors(
    model: &AEModel,
    vectors: &[SpeakerVector],
    length_normalize: bool,
) -> Result<Vec<SpeakerVector>, AeError> {
    if vectors.is_empty() {
        return Err(AeError::EmptyInput("no vectors to extract from".into()));
    }
    let dim = model.dim();
    if let Some(bad) = vectors.iter().find(|v| v.values.len() != dim) {
        return Err(AeError::DimMismatch {
            expected: dim,
            got: bad.values.len(),
        });
    }
    let mut out = Vec::with_capacity(vectors.len());
    for chunk in vectors.chunks(512) {
        let mut flat = Vec::with_capacity(chunk.len() * dim);
        for v in chunk {
            flat.extend(maybe_normalize(&v.values, length_normalize));
        }
        let batch = Tensor::from_vec(&[chunk.len(), dim], flat)?;
        let y = model.forward(&batch)?;
        y.ensure_finite("ae-vector batch")?;
        for (i, v) in chunk.iter().enumerate() {
            out.push(SpeakerVector::new(
                v.id.clone(),
                y.data()[i * dim..(i + 1) * dim].to_vec(),
            ));
        }
    }
    Ok(out)
}
