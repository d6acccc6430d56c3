//! The shared convolutional encoder: mel-spectrogram in, embedding out.
//!
//! Three VGG-style blocks (two 3x3 same-padded convs + ReLU, then a 2x2
//! max-pool), a reshape that stacks channels over the surviving frequency
//! bins, self-attention pooling over time, and two fully connected
//! layers. Only `fc1` is followed by ReLU; the embedding itself is left
//! linear so downstream heads decide how to squash it.

use super::{EncoderProfile, SiameseError};
use crate::nncore::{
    l2_normalize, l2_normalize_backward, maxpool2d, maxpool2d_backward, relu, relu_backward,
    Conv2d, Linear, Net, NnError, Param, SapCache, SapPool, Tensor,
};
use rand::Rng;

/// Stage name plus output shape, one entry per layer of a traced forward.
pub type ShapeTrace = Vec<(String, Vec<usize>)>;

#[derive(Debug, Clone)]
pub struct EncoderModel {
    profile: EncoderProfile,
    conv1_1: Conv2d,
    conv1_2: Conv2d,
    conv2_1: Conv2d,
    conv2_2: Conv2d,
    conv3_1: Conv2d,
    conv3_2: Conv2d,
    sap: SapPool,
    fc1: Linear,
    fc2: Linear,
}

/// One conv block's retained activations.
#[derive(Debug, Clone)]
struct BlockCache {
    /// Pre-activation of the block's first conv.
    a_first: Tensor,
    /// ReLU of the above; input to the second conv.
    r_first: Tensor,
    /// Pre-activation of the second conv.
    a_second: Tensor,
    /// Shape fed into the pool (for routing gradients back through it).
    pool_in_shape: Vec<usize>,
    argmax: Vec<usize>,
    /// Block output; the next block's input.
    pooled: Tensor,
}

/// Everything the encoder's backward pass needs, produced by
/// [`EncoderModel::forward_cached`].
#[derive(Debug, Clone)]
pub struct EncoderCache {
    input: Tensor,
    blocks: Vec<BlockCache>,
    /// `[flat_dim, t]` view of the last pool output.
    flat: Tensor,
    sap: SapCache,
    pooled_vec: Tensor,
    z1: Tensor,
    h1: Tensor,
    pub output: Tensor,
}

impl EncoderModel {
    pub fn new(profile: EncoderProfile, rng: &mut impl Rng) -> Result<Self, SiameseError> {
        profile.validate()?;
        let [c1, c2, c3] = profile.channels;
        Ok(EncoderModel {
            conv1_1: Conv2d::new(1, c1, 3, 3, 1, rng),
            conv1_2: Conv2d::new(c1, c1, 3, 3, 1, rng),
            conv2_1: Conv2d::new(c1, c2, 3, 3, 1, rng),
            conv2_2: Conv2d::new(c2, c2, 3, 3, 1, rng),
            conv3_1: Conv2d::new(c2, c3, 3, 3, 1, rng),
            conv3_2: Conv2d::new(c3, c3, 3, 3, 1, rng),
            sap: SapPool::new(profile.flat_dim(), profile.attn_dim, rng),
            fc1: Linear::new(profile.flat_dim(), profile.fc_hidden, rng),
            fc2: Linear::new(profile.fc_hidden, profile.embed_dim, rng),
            profile,
        })
    }

    pub fn profile(&self) -> &EncoderProfile {
        &self.profile
    }

    fn check_input(&self, feats: &Tensor) -> Result<(), SiameseError> {
        let shape = feats.shape();
        if shape.len() != 2 {
            return Err(NnError::Shape(format!(
                "encoder expects a [bins, frames] matrix, got {shape:?}"
            ))
            .into());
        }
        if shape[0] != self.profile.mel_bins {
            return Err(SiameseError::BinMismatch {
                expected: self.profile.mel_bins,
                got: shape[0],
            });
        }
        if shape[1] < self.profile.min_frames() {
            return Err(SiameseError::TooShort {
                frames: shape[1],
                min: self.profile.min_frames(),
            });
        }
        Ok(())
    }

    fn run_block(
        first: &Conv2d,
        second: &Conv2d,
        input: &Tensor,
    ) -> Result<BlockCache, SiameseError> {
        let a_first = first.forward(input)?;
        let r_first = relu(&a_first);
        let a_second = second.forward(&r_first)?;
        let r_second = relu(&a_second);
        let pool_in_shape = r_second.shape().to_vec();
        let (pooled, argmax) = maxpool2d(&r_second)?;
        Ok(BlockCache {
            a_first,
            r_first,
            a_second,
            pool_in_shape,
            argmax,
            pooled,
        })
    }

    /// Forward pass retaining every activation needed for `backward`.
    pub fn forward_cached(&self, feats: &Tensor) -> Result<EncoderCache, SiameseError> {
        self.check_input(feats)?;
        let shape = feats.shape();
        let input = feats.clone().reshape(&[1, shape[0], shape[1]])?;

        let b1 = Self::run_block(&self.conv1_1, &self.conv1_2, &input)?;
        let b2 = Self::run_block(&self.conv2_1, &self.conv2_2, &b1.pooled)?;
        let b3 = Self::run_block(&self.conv3_1, &self.conv3_2, &b2.pooled)?;

        // [c, h, w] -> [c*h, w]: row-major layout makes this a free view,
        // turning each time step into one tall feature column.
        let p3 = b3.pooled.shape().to_vec();
        let flat = b3.pooled.clone().reshape(&[p3[0] * p3[1], p3[2]])?;

        let (pooled_vec, sap) = self.sap.forward_cached(&flat)?;
        let z1 = self.fc1.forward(&pooled_vec)?;
        let h1 = relu(&z1);
        let output = self.fc2.forward(&h1)?;
        Ok(EncoderCache {
            input,
            blocks: vec![b1, b2, b3],
            flat,
            sap,
            pooled_vec,
            z1,
            h1,
            output,
        })
    }

    /// Embeds a `[bins, frames]` feature matrix into `[embed_dim]`.
    pub fn forward(&self, feats: &Tensor) -> Result<Tensor, SiameseError> {
        Ok(self.forward_cached(feats)?.output)
    }

    /// Forward pass that also reports every stage's output shape, in
    /// order, for conformance assertions and debugging.
    pub fn forward_traced(
        &self,
        feats: &Tensor,
    ) -> Result<(Tensor, ShapeTrace), SiameseError> {
        let cache = self.forward_cached(feats)?;
        let mut trace = Vec::new();
        for (i, b) in cache.blocks.iter().enumerate() {
            let n = i + 1;
            trace.push((format!("conv{n}_1"), b.a_first.shape().to_vec()));
            trace.push((format!("conv{n}_2"), b.a_second.shape().to_vec()));
            trace.push((format!("mpool{n}"), b.pooled.shape().to_vec()));
        }
        trace.push(("sap".into(), cache.pooled_vec.shape().to_vec()));
        trace.push(("fc1".into(), cache.z1.shape().to_vec()));
        trace.push(("fc2".into(), cache.output.shape().to_vec()));
        Ok((cache.output, trace))
    }

    /// Accumulates parameter gradients for one sample and returns the
    /// gradient with respect to the `[bins, frames]` input.
    ///
    /// Gradients add into the existing accumulators, so calling this once
    /// per branch realizes weight sharing: a multi-branch model simply
    /// backpropagates each branch through the same encoder.
    pub fn backward(
        &mut self,
        cache: &EncoderCache,
        grad_out: &Tensor,
    ) -> Result<Tensor, SiameseError> {
        let g_h1 = self.fc2.backward(&cache.h1, grad_out)?;
        let g_z1 = relu_backward(&cache.z1, &g_h1);
        let g_pooled = self.fc1.backward(&cache.pooled_vec, &g_z1)?;
        let g_flat = self.sap.backward(&cache.flat, &cache.sap, &g_pooled)?;

        let p3 = cache.blocks[2].pooled.shape().to_vec();
        let mut grad = g_flat.reshape(&p3)?;

        let pairs: [(&mut Conv2d, &mut Conv2d, &BlockCache, &Tensor); 3] = [
            (
                &mut self.conv3_1,
                &mut self.conv3_2,
                &cache.blocks[2],
                &cache.blocks[1].pooled,
            ),
            (
                &mut self.conv2_1,
                &mut self.conv2_2,
                &cache.blocks[1],
                &cache.blocks[0].pooled,
            ),
            (
                &mut self.conv1_1,
                &mut self.conv1_2,
                &cache.blocks[0],
                &cache.input,
            ),
        ];
        for (first, second, block, block_input) in pairs {
            let g_r_second = maxpool2d_backward(&block.pool_in_shape, &block.argmax, &grad);
            let g_a_second = relu_backward(&block.a_second, &g_r_second);
            let g_r_first = second.backward(&block.r_first, &g_a_second)?;
            let g_a_first = relu_backward(&block.a_first, &g_r_first);
            grad = first.backward(block_input, &g_a_first)?;
        }

        let in_shape = cache.input.shape();
        Ok(grad.reshape(&[in_shape[1], in_shape[2]])?)
    }

    /// l2-normalized embedding, as used by the triple-branch model.
    pub fn embed_unit(&self, feats: &Tensor) -> Result<Tensor, SiameseError> {
        Ok(l2_normalize(&self.forward(feats)?)?)
    }

    /// Backward through l2-normalization into the encoder.
    pub fn backward_unit(
        &mut self,
        cache: &EncoderCache,
        grad_unit: &Tensor,
    ) -> Result<Tensor, SiameseError> {
        let g_raw = l2_normalize_backward(&cache.output, grad_unit)?;
        self.backward(cache, &g_raw)
    }
}

impl Net for EncoderModel {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        for (name, conv) in [
            ("conv1_1", &self.conv1_1),
            ("conv1_2", &self.conv1_2),
            ("conv2_1", &self.conv2_1),
            ("conv2_2", &self.conv2_2),
            ("conv3_1", &self.conv3_1),
            ("conv3_2", &self.conv3_2),
        ] {
            f(&format!("{name}.weight"), &conv.weight);
            f(&format!("{name}.bias"), &conv.bias);
        }
        f("sap.w", &self.sap.w);
        f("sap.b", &self.sap.b);
        f("sap.v", &self.sap.v);
        f("fc1.weight", &self.fc1.weight);
        f("fc1.bias", &self.fc1.bias);
        f("fc2.weight", &self.fc2.weight);
        f("fc2.bias", &self.fc2.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        for (name, conv) in [
            ("conv1_1", &mut self.conv1_1),
            ("conv1_2", &mut self.conv1_2),
            ("conv2_1", &mut self.conv2_1),
            ("conv2_2", &mut self.conv2_2),
            ("conv3_1", &mut self.conv3_1),
            ("conv3_2", &mut self.conv3_2),
        ] {
            f(&format!("{name}.weight"), &mut conv.weight);
            f(&format!("{name}.bias"), &mut conv.bias);
        }
        f("sap.w", &mut self.sap.w);
        f("sap.b", &mut self.sap.b);
        f("sap.v", &mut self.sap.v);
        f("fc1.weight", &mut self.fc1.weight);
        f("fc1.bias", &mut self.fc1.bias);
        f("fc2.weight", &mut self.fc2.weight);
        f("fc2.bias", &mut self.fc2.bias);
    }
}
