//! Synthetic labeled corpus.
//!
//! Each speaker is a fixed mixture of three harmonics - a crude but
//! effective stand-in for a vocal-tract envelope that the mel front end
//! can separate - and each utterance re-renders that mixture with fresh
//! phases, slight amplitude jitter, and additive noise at roughly 10 dB
//! SNR. Alongside the audio, every utterance gets a ground-truth
//! reference vector drawn around its speaker's centroid, standing in for
//! an i-vector extractor.
//!
//! Determinism: every speaker and utterance derives its own RNG stream
//! from `(seed, speaker, utterance, domain tag)`, so generation order
//! (or parallelism) cannot change the corpus.

use super::wav::WavAudio;
use super::FeatureError;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_speakers: usize,
    pub utts_per_speaker: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub duration_secs: f64,
    /// Dimension of the ground-truth reference vectors.
    pub vector_dim: usize,
    /// Per-coordinate noise around the speaker centroid.
    pub vector_noise_sigma: f64,
    pub snr_db: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_speakers: 20,
            utts_per_speaker: 10,
            seed: 0,
            sample_rate: 16000,
            duration_secs: 4.0,
            vector_dim: 400,
            vector_noise_sigma: 0.3,
            snr_db: 10.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.num_speakers < 2 {
            return Err(FeatureError::BadConfig(format!(
                "need at least 2 speakers, got {}",
                self.num_speakers
            )));
        }
        if self.utts_per_speaker == 0 || self.vector_dim == 0 {
            return Err(FeatureError::BadConfig(
                "utts_per_speaker and vector_dim must be >= 1".into(),
            ));
        }
        if self.sample_rate == 0 || self.duration_secs <= 0.0 {
            return Err(FeatureError::BadConfig(
                "sample_rate and duration must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A speaker's fixed identity: harmonic frequencies/amplitudes and the
/// centroid its utterance vectors scatter around.
#[derive(Debug, Clone)]
pub struct SpeakerProfile {
    pub name: String,
    pub index: usize,
    pub freqs_hz: [f64; 3],
    pub amps: [f64; 3],
    pub centroid: Vec<f64>,
}

/// One generated utterance with its ground-truth label and vector.
#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub id: String,
    pub speaker: String,
    pub audio: WavAudio,
    pub ivector: Vec<f64>,
}

pub fn speaker_name(index: usize) -> String {
    format!("spk{index:03}")
}

pub fn utterance_id(speaker: usize, utt: usize) -> String {
    format!("spk{speaker:03}_utt{utt:03}")
}

/// Standard normal sample via the Box-Muller transform.
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    // 1 - u keeps the log argument in (0, 1], never 0
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn stream_rng(seed: u64, speaker: u32, utt: u32, domain: u8) -> ChaCha20Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..12].copy_from_slice(&speaker.to_le_bytes());
    s[12..16].copy_from_slice(&utt.to_le_bytes());
    s[16] = domain;
    ChaCha20Rng::from_seed(s)
}

/// Derives speaker `index`'s identity from the corpus seed.
pub fn speaker_profile(config: &SynthConfig, index: usize) -> SpeakerProfile {
    let mut rng = stream_rng(config.seed, index as u32, 0, 1);
    let nyquist = config.sample_rate as f64 / 2.0;
    let f_hi = (nyquist * 0.9).min(3600.0);
    let mut freqs_hz = [0.0; 3];
    for f in freqs_hz.iter_mut() {
        *f = rng.gen_range(200.0..f_hi);
    }
    let mut amps = [0.0; 3];
    for a in amps.iter_mut() {
        *a = rng.gen_range(0.5..1.0);
    }
    let centroid = (0..config.vector_dim).map(|_| gaussian(&mut rng)).collect();
    SpeakerProfile {
        name: speaker_name(index),
        index,
        freqs_hz,
        amps,
        centroid,
    }
}

/// Renders utterance `utt` of a speaker: audio plus reference vector.
pub fn synth_utterance(
    config: &SynthConfig,
    profile: &SpeakerProfile,
    utt: usize,
) -> SynthUtterance {
    let mut rng = stream_rng(config.seed, profile.index as u32, utt as u32, 2);
    let n = (config.sample_rate as f64 * config.duration_secs).round() as usize;

    let phases: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..std::f64::consts::TAU));
    let jitter: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.85..1.15));

    let mut samples = vec![0.0f64; n];
    let dt = 1.0 / config.sample_rate as f64;
    for h in 0..3 {
        let amp = profile.amps[h] * jitter[h];
        let w = std::f64::consts::TAU * profile.freqs_hz[h];
        let ph = phases[h];
        for (i, s) in samples.iter_mut().enumerate() {
            *s += amp * (w * i as f64 * dt + ph).sin();
        }
    }

    let signal_power = samples.iter().map(|s| s * s).sum::<f64>() / n as f64;
    let noise_sigma = (signal_power / 10f64.powf(config.snr_db / 10.0)).sqrt();
    for s in samples.iter_mut() {
        *s += noise_sigma * gaussian(&mut rng);
    }

    // keep well inside the 16-bit range so quantization never clips
    let peak = samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    if peak > 0.9 {
        let scale = 0.9 / peak;
        for s in samples.iter_mut() {
            *s *= scale;
        }
    }

    let ivector = profile
        .centroid
        .iter()
        .map(|&c| c + config.vector_noise_sigma * gaussian(&mut rng))
        .collect();

    SynthUtterance {
        id: utterance_id(profile.index, utt),
        speaker: profile.name.clone(),
        audio: WavAudio {
            sample_rate: config.sample_rate,
            samples,
        },
        ivector,
    }
}
