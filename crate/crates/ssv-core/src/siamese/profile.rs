//! Encoder size profiles.

use super::SiameseError;
use serde::{Deserialize, Serialize};

/// Every size knob of the convolutional encoder in one place.
///
/// The `full` profile is the reference architecture. The `tiny` profile
/// divides the channel widths by 16 and shrinks the mel/embedding dims so
/// that finite-difference gradient checks and CI-scale training runs
/// finish in seconds instead of hours; the layer *structure* is identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderProfile {
    /// Mel bins expected on the frequency axis.
    pub mel_bins: usize,
    /// Output channels of the three conv blocks.
    pub channels: [usize; 3],
    /// Hidden width of the attention scorer in the pooling layer.
    pub attn_dim: usize,
    /// Width of the first fully connected layer after pooling.
    pub fc_hidden: usize,
    /// Embedding dimension (the second fully connected layer's output).
    pub embed_dim: usize,
}

impl EncoderProfile {
    /// Reference sizes: 80 mel bins, channels 128/256/512, 5120-d pooled
    /// features, fc 1024 → 400-d embeddings.
    pub fn full() -> Self {
        EncoderProfile {
            mel_bins: 80,
            channels: [128, 256, 512],
            attn_dim: 128,
            fc_hidden: 1024,
            embed_dim: 400,
        }
    }

    /// Gradient-check and smoke-test sizes: 8 mel bins, channels divided
    /// by 16, 25-d embeddings.
    pub fn tiny() -> Self {
        EncoderProfile {
            mel_bins: 8,
            channels: [8, 16, 32],
            attn_dim: 8,
            fc_hidden: 64,
            embed_dim: 25,
        }
    }

    /// Looks up a profile by name (`"full"` or `"tiny"`).
    pub fn by_name(name: &str) -> Result<Self, SiameseError> {
        match name {
            "full" => Ok(Self::full()),
            "tiny" => Ok(Self::tiny()),
            other => Err(SiameseError::BadConfig(format!(
                "unknown encoder profile '{other}' (expected 'full' or 'tiny')"
            ))),
        }
    }

    /// Frequency extent after the three 2x2 pools.
    pub fn pooled_bins(&self) -> usize {
        self.mel_bins / 2 / 2 / 2
    }

    /// Input width of the pooling layer: channels x pooled frequency bins.
    pub fn flat_dim(&self) -> usize {
        self.channels[2] * self.pooled_bins()
    }

    /// Shortest input (in frames) that survives the three pools.
    pub fn min_frames(&self) -> usize {
        8
    }

    pub fn validate(&self) -> Result<(), SiameseError> {
        if self.mel_bins < 8 || !self.mel_bins.is_multiple_of(8) {
            return Err(SiameseError::BadConfig(format!(
                "mel_bins must be a positive multiple of 8 to survive three 2x2 pools, got {}",
                self.mel_bins
            )));
        }
        if self.channels.contains(&0)
            || self.attn_dim == 0
            || self.fc_hidden == 0
            || self.embed_dim == 0
        {
            return Err(SiameseError::BadConfig("zero-width layer".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_profile_flattens_to_5120() {
        let p = EncoderProfile::full();
        p.validate().unwrap();
        assert_eq!(p.pooled_bins(), 10);
        assert_eq!(p.flat_dim(), 5120);
        assert_eq!(p.embed_dim, 400);
    }

    #[test]
    fn tiny_profile_is_sixteenth_width() {
        let p = EncoderProfile::tiny();
        p.validate().unwrap();
        assert_eq!(p.channels, [8, 16, 32]);
        assert_eq!(p.pooled_bins(), 1);
        assert_eq!(p.flat_dim(), 32);
    }

    #[test]
    fn by_name_rejects_unknown() {
        assert_eq!(EncoderProfile::by_name("full").unwrap(), EncoderProfile::full());
        assert_eq!(EncoderProfile::by_name("tiny").unwrap(), EncoderProfile::tiny());
        assert!(EncoderProfile::by_name("medium").is_err());
    }

    #[test]
    fn indivisible_bins_rejected() {
        let mut p = EncoderProfile::tiny();
        p.mel_bins = 12;
        assert!(p.validate().is_err());
        p.mel_bins = 0;
        assert!(p.validate().is_err());
    }
}
