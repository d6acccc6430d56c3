//! Fixed-length crops of spectrograms.
//!
//! The networks consume exactly N frames. Long utterances contribute a
//! random contiguous window; short ones are wrap-padded (tiled) up to N
//! first, so no frame is silent filler and attention has real content
//! everywhere.

use super::mel::MelSpectrogram;
use crate::nncore::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Crop width and the seed used when the crop offset must be a pure
/// function of the utterance (evaluation-time determinism).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropConfig {
    pub frames: usize,
    pub seed: u64,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig {
            frames: 350,
            seed: 0,
        }
    }
}

/// Effective length the crop offset ranges over: the utterance itself, or
/// the shortest whole tiling that covers `n` frames.
fn tiled_len(t: usize, n: usize) -> usize {
    if t >= n {
        t
    } else {
        t * n.div_ceil(t)
    }
}

/// Deterministic crop primitive: `n` frames starting at `offset` within
/// the (virtually) tiled spectrogram, as an f64 `[bins, n]` tensor.
pub fn crop_at(spec: &MelSpectrogram, n: usize, offset: usize) -> Tensor {
    assert!(n >= 1, "crop width must be >= 1");
    let t = spec.frames;
    assert!(
        offset + n <= tiled_len(t, n),
        "offset {offset} + width {n} exceeds tiled length {}",
        tiled_len(t, n)
    );
    let mut data = vec![0.0f64; spec.bins * n];
    for b in 0..spec.bins {
        let row = &spec.data[b * t..(b + 1) * t];
        let out = &mut data[b * n..(b + 1) * n];
        for (j, o) in out.iter_mut().enumerate() {
            *o = row[(offset + j) % t] as f64;
        }
    }
    Tensor::from_vec(&[spec.bins, n], data).expect("sized above")
}

/// Crop at an offset drawn from the caller's RNG, uniform over
/// `[0, tiled_len - n]` inclusive. Training loops drive this with one
/// sequential RNG so every epoch sees fresh windows.
pub fn random_crop_with_rng(spec: &MelSpectrogram, n: usize, rng: &mut impl Rng) -> Tensor {
    let max_offset = tiled_len(spec.frames, n) - n;
    let offset = if max_offset == 0 {
        0
    } else {
        rng.gen_range(0..=max_offset)
    };
    crop_at(spec, n, offset)
}

/// Crop whose offset depends only on `(config.seed, utterance_id)`: the
/// same utterance always yields the same window, different utterances
/// get independent ones. Used wherever features must be reproducible
/// artifacts rather than training-time augmentation.
pub fn random_crop(spec: &MelSpectrogram, config: &CropConfig) -> Tensor {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed ^ fnv1a64(spec.utterance_id.as_bytes()));
    random_crop_with_rng(spec, config.frames, &mut rng)
}

/// FNV-1a, used to fold utterance ids into RNG seeds. Stable across
/// platforms and releases, unlike the stdlib's default hasher.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    /// bins x t ramp spectrogram with distinguishable entries
    fn ramp(bins: usize, t: usize) -> MelSpectrogram {
        let data: Vec<f32> = (0..bins * t).map(|i| i as f32).collect();
        MelSpectrogram::new("ramp", bins, t, data)
    }

    #[test]
    fn exact_length_returns_the_whole_spectrogram() {
        let spec = ramp(4, 10);
        let crop = random_crop(&spec, &CropConfig { frames: 10, seed: 5 });
        assert_eq!(crop.shape(), &[4, 10]);
        let expected: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert_eq!(crop.data(), &expected[..]);
    }

    #[test]
    fn long_utterance_offsets_stay_in_bounds() {
        let spec = ramp(2, 700);
        for seed in 0..50 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let crop = random_crop_with_rng(&spec, 350, &mut rng);
            assert_eq!(crop.shape(), &[2, 350]);
            let offset = crop.data()[0] as usize;
            assert!(offset <= 350, "offset {offset} out of [0, 350]");
            // contiguity: row 0 of the ramp is 0..700, so a slice is consecutive
            for j in 0..350 {
                assert_eq!(crop.data()[j], (offset + j) as f64);
            }
        }
    }

    #[test]
    fn short_utterance_wraps_around() {
        let spec = ramp(1, 100);
        // tiled length 400, so offsets reach 50
        let mut seen_wrap = false;
        for seed in 0..20 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let crop = random_crop_with_rng(&spec, 350, &mut rng);
            assert_eq!(crop.shape(), &[1, 350]);
            let offset = crop.data()[0] as usize;
            assert!(offset <= 50);
            for j in 0..350 {
                assert_eq!(crop.data()[j], ((offset + j) % 100) as f64);
            }
            seen_wrap |= offset > 0;
        }
        assert!(seen_wrap, "every sampled offset was 0; wrap never exercised");
    }

    #[test]
    fn seeded_crop_is_reproducible_and_id_sensitive() {
        let a = ramp(3, 973);
        let cfg = CropConfig { frames: 350, seed: 42 };
        let c1 = random_crop(&a, &cfg);
        let c2 = random_crop(&a, &cfg);
        assert_eq!(c1.data(), c2.data());

        let mut b = ramp(3, 973);
        b.utterance_id = "other".into();
        let c3 = random_crop(&b, &cfg);
        assert_ne!(c1.data()[0], c3.data()[0], "distinct ids should crop differently");
    }

    #[test]
    fn crop_is_always_bins_by_n() {
        for t in [1, 5, 349, 350, 351, 1000] {
            let spec = ramp(80, t);
            let crop = random_crop(&spec, &CropConfig { frames: 350, seed: 1 });
            assert_eq!(crop.shape(), &[80, 350], "t = {t}");
        }
    }
}
