//! Double-branch model: a binary same/different-speaker classifier.

use super::encoder::{EncoderCache, EncoderModel};
use super::{EncoderProfile, SiameseError};
use crate::nncore::{relu, relu_backward, sigmoid_scalar, Linear, Net, Param, Tensor};
use rand::Rng;

/// Two weight-shared encoder branches whose embeddings are concatenated
/// and classified by a stack of fully connected layers ending in a
/// sigmoid. The output is used directly as the verification score.
#[derive(Debug, Clone)]
pub struct DoubleBranchModel {
    encoder: EncoderModel,
    /// Hidden layers with ReLU, then a final 1-wide layer feeding the
    /// sigmoid.
    head: Vec<Linear>,
}

/// Activations from [`DoubleBranchModel::forward_cached`].
#[derive(Debug)]
pub struct DoubleCache {
    enc_a: EncoderCache,
    enc_b: EncoderCache,
    /// Input vector to each head layer (index 0 is the concatenation).
    head_inputs: Vec<Tensor>,
    /// Pre-activation of each hidden head layer.
    head_pre: Vec<Tensor>,
    pub logit: f64,
    pub score: f64,
}

/// Reference head widths (1024/512/256/64 for 400-d embeddings), scaled
/// proportionally for smaller profiles with a floor of 4 units per layer.
pub fn default_head(embed_dim: usize) -> Vec<usize> {
    [1024, 512, 256, 64]
        .iter()
        .map(|&w| (w * embed_dim / 400).max(4))
        .collect()
}

impl DoubleBranchModel {
    pub fn new(
        profile: EncoderProfile,
        head_hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Result<Self, SiameseError> {
        if head_hidden.is_empty() || head_hidden.contains(&0) {
            return Err(SiameseError::BadConfig(
                "head needs at least one nonzero hidden layer".into(),
            ));
        }
        let encoder = EncoderModel::new(profile, rng)?;
        let mut dims = vec![2 * encoder.profile().embed_dim];
        dims.extend_from_slice(head_hidden);
        dims.push(1);
        let head = dims
            .windows(2)
            .map(|w| Linear::new(w[0], w[1], rng))
            .collect();
        Ok(DoubleBranchModel { encoder, head })
    }

    /// Convenience constructor with the reference head taper.
    pub fn with_default_head(
        profile: EncoderProfile,
        rng: &mut impl Rng,
    ) -> Result<Self, SiameseError> {
        let head = default_head(profile.embed_dim);
        Self::new(profile, &head, rng)
    }

    pub fn encoder(&self) -> &EncoderModel {
        &self.encoder
    }

    pub fn head_hidden(&self) -> Vec<usize> {
        self.head[..self.head.len() - 1]
            .iter()
            .map(|l| l.out_dim())
            .collect()
    }

    fn head_forward(&self, concat: Tensor) -> (Vec<Tensor>, Vec<Tensor>, f64) {
        let mut inputs = Vec::with_capacity(self.head.len());
        let mut pre = Vec::with_capacity(self.head.len() - 1);
        let mut x = concat;
        for (i, layer) in self.head.iter().enumerate() {
            let z = layer
                .forward(&x)
                .expect("head layer dims are fixed at construction");
            inputs.push(x);
            if i + 1 < self.head.len() {
                let h = relu(&z);
                pre.push(z);
                x = h;
            } else {
                x = z;
            }
        }
        let logit = x.data()[0];
        (inputs, pre, logit)
    }

    /// Scores a pair of `[bins, frames]` feature matrices; the branches
    /// may have different lengths.
    pub fn forward(&self, feat_a: &Tensor, feat_b: &Tensor) -> Result<f64, SiameseError> {
        Ok(self.forward_cached(feat_a, feat_b)?.score)
    }

    pub fn forward_cached(
        &self,
        feat_a: &Tensor,
        feat_b: &Tensor,
    ) -> Result<DoubleCache, SiameseError> {
        let enc_a = self.encoder.forward_cached(feat_a)?;
        let enc_b = self.encoder.forward_cached(feat_b)?;
        let mut concat = enc_a.output.data().to_vec();
        concat.extend_from_slice(enc_b.output.data());
        let concat = Tensor::from_vec(&[concat.len()], concat)?;
        let (head_inputs, head_pre, logit) = self.head_forward(concat);
        Ok(DoubleCache {
            enc_a,
            enc_b,
            head_inputs,
            head_pre,
            logit,
            score: sigmoid_scalar(logit),
        })
    }

    /// Accumulates gradients from `d loss / d logit` — for binary cross
    /// entropy on the sigmoid output that is simply `score - label`.
    pub fn backward(&mut self, cache: &DoubleCache, grad_logit: f64) -> Result<(), SiameseError> {
        let mut g = Tensor::from_vec(&[1], vec![grad_logit])?;
        for i in (0..self.head.len()).rev() {
            g = self.head[i].backward(&cache.head_inputs[i], &g)?;
            if i > 0 {
                g = relu_backward(&cache.head_pre[i - 1], &g);
            }
        }
        let e = self.encoder.profile().embed_dim;
        let g_a = Tensor::from_vec(&[e], g.data()[..e].to_vec())?;
        let g_b = Tensor::from_vec(&[e], g.data()[e..].to_vec())?;
        // Both branches are the same parameters: backward twice, gradients
        // accumulate.
        self.encoder.backward(&cache.enc_a, &g_a)?;
        self.encoder.backward(&cache.enc_b, &g_b)?;
        Ok(())
    }
}

impl Net for DoubleBranchModel {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        let mut g = |name: &str, p: &Param| f(&format!("encoder.{name}"), p);
        self.encoder.visit_params(&mut g);
        for (i, layer) in self.head.iter().enumerate() {
            f(&format!("head{i}.weight"), &layer.weight);
            f(&format!("head{i}.bias"), &layer.bias);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        let mut g = |name: &str, p: &mut Param| f(&format!("encoder.{name}"), p);
        self.encoder.visit_params_mut(&mut g);
        for (i, layer) in self.head.iter_mut().enumerate() {
            f(&format!("head{i}.weight"), &mut layer.weight);
            f(&format!("head{i}.bias"), &mut layer.bias);
        }
    }
}
