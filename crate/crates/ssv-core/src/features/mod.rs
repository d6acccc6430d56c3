//! Audio ingestion and acoustic features.
//!
//! PCM WAV files come in, 80-bin log-mel spectrograms come out, with
//! fixed-length random crops feeding the networks. A synthetic labeled
//! corpus generator provides desk-scale audio whose speakers are
//! separable by spectral envelope, plus ground-truth reference vectors,
//! so the whole pipeline can run and be audited without real data.

mod cache;
mod crop;
mod manifest;
mod mel;
mod synth;
mod wav;

pub use cache::{read_feature_cache, write_feature_cache, CACHE_MAGIC};
pub use crop::{crop_at, random_crop, random_crop_with_rng, CropConfig};
pub use manifest::{read_manifest, write_manifest, ManifestEntry};
pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, MelParams, MelSpectrogram};
pub use synth::{
    gaussian, speaker_profile, synth_utterance, utterance_id, SpeakerProfile, SynthConfig,
    SynthUtterance,
};
pub use wav::{read_wav, write_wav_mono16, WavAudio};

use thiserror::Error;

/// Errors from audio parsing, feature extraction, and the cache format.
#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{path} at byte {offset}: {detail}")]
    WavParse {
        path: String,
        offset: usize,
        detail: String,
    },
    #[error("audio of {samples} samples is shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("non-finite feature value in {0}")]
    NonFinite(String),
    #[error("{path}:{line}: {detail}")]
    BadRecord {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("cache error in {path}: {detail}")]
    Cache { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
