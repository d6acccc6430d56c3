//! Log-mel spectrograms.
//!
//! Short-time FFT with a periodic Hann window, power spectrum, triangular
//! mel filterbank, natural log with a floor. Analysis runs in f64; the
//! finished spectrogram is stored as f32, matching the on-disk cache
//! format exactly, so training sees identical features whether they come
//! from memory or from disk.

use super::wav::WavAudio;
use super::FeatureError;
use serde::{Deserialize, Serialize};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Spectrogram analysis parameters. The defaults (25 ms / 10 ms Hann
/// frames, 80 mel bins over 20 Hz to Nyquist, natural log floored at
/// 1e-10) are the common speaker-verification front end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelParams {
    pub bins: usize,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fmin_hz: f64,
    /// Upper filterbank edge; `None` means the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    /// Power floor applied before the log.
    pub log_floor: f64,
    /// Subtract each utterance's per-bin mean after the log.
    pub mean_normalize: bool,
}

impl Default for MelParams {
    fn default() -> Self {
        MelParams {
            bins: 80,
            window_ms: 25.0,
            hop_ms: 10.0,
            fmin_hz: 20.0,
            fmax_hz: None,
            log_floor: 1e-10,
            mean_normalize: false,
        }
    }
}

impl MelParams {
    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 * self.window_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 * self.hop_ms / 1000.0).round() as usize
    }

    fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        if self.bins == 0 {
            return Err(FeatureError::BadConfig("mel bins must be >= 1".into()));
        }
        if self.window_samples(sample_rate) == 0 || self.hop_samples(sample_rate) == 0 {
            return Err(FeatureError::BadConfig(format!(
                "window {} ms / hop {} ms collapse to zero samples at {} Hz",
                self.window_ms, self.hop_ms, sample_rate
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let fmax = self.fmax_hz.unwrap_or(nyquist);
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < fmax && fmax <= nyquist) {
            return Err(FeatureError::BadConfig(format!(
                "mel range {} Hz .. {} Hz invalid for nyquist {} Hz",
                self.fmin_hz, fmax, nyquist
            )));
        }
        if self.log_floor <= 0.0 {
            return Err(FeatureError::BadConfig("log floor must be positive".into()));
        }
        Ok(())
    }
}

/// An 80 x T log-mel matrix, stored row-major as f32.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub utterance_id: String,
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<f32>,
}

impl MelSpectrogram {
    pub fn new(utterance_id: impl Into<String>, bins: usize, frames: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), bins * frames, "mel data length mismatch");
        MelSpectrogram {
            utterance_id: utterance_id.into(),
            bins,
            frames,
            data,
        }
    }

    pub fn value(&self, bin: usize, frame: usize) -> f32 {
        self.data[bin * self.frames + frame]
    }
}

/// HTK mel scale: `2595 log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filterbank as `bins` sparse rows of `(fft_bin, weight)`.
///
/// Filter m rises over `[edge m, edge m+1]` and falls over
/// `[edge m+1, edge m+2]`, with the `bins + 2` edges equally spaced in mel
/// between `fmin` and `fmax`.
pub fn mel_filterbank(
    bins: usize,
    fmin_hz: f64,
    fmax_hz: f64,
    sample_rate: u32,
    n_fft: usize,
) -> Vec<Vec<(usize, f64)>> {
    let edges_hz: Vec<f64> = {
        let (m_lo, m_hi) = (hz_to_mel(fmin_hz), hz_to_mel(fmax_hz));
        (0..bins + 2)
            .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (bins + 1) as f64))
            .collect()
    };
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let n_bins = n_fft / 2 + 1;
    let mut filters = Vec::with_capacity(bins);
    for m in 0..bins {
        let (lo, mid, hi) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        let mut row = Vec::new();
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > lo && f < mid {
                (f - lo) / (mid - lo)
            } else if f == mid {
                1.0
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
            if w > 0.0 {
                row.push((k, w));
            }
        }
        filters.push(row);
    }
    filters
}

/// Computes the log-mel spectrogram of mono audio.
///
/// Frame count is `1 + floor((len - window) / hop)`; audio shorter than
/// one window is an error rather than a silently empty result.
pub fn mel_spectrogram(
    audio: &WavAudio,
    utterance_id: &str,
    params: &MelParams,
) -> Result<MelSpectrogram, FeatureError> {
    params.validate(audio.sample_rate)?;
    let win = params.window_samples(audio.sample_rate);
    let hop = params.hop_samples(audio.sample_rate);
    if audio.samples.len() < win {
        return Err(FeatureError::TooShort {
            samples: audio.samples.len(),
            window: win,
        });
    }
    let frames = 1 + (audio.samples.len() - win) / hop;
    let n_fft = win.next_power_of_two();
    let fmax = params.fmax_hz.unwrap_or(audio.sample_rate as f64 / 2.0);
    let filters = mel_filterbank(params.bins, params.fmin_hz, fmax, audio.sample_rate, n_fft);

    // periodic Hann window
    let window: Vec<f64> = (0..win)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / win as f64).cos())
        .collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0f64; n_fft / 2 + 1];
    let mut data = vec![0.0f32; params.bins * frames];

    for t in 0..frames {
        let start = t * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if i < win {
                Complex64::new(audio.samples[start + i] * window[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p = buf[k].norm_sqr();
        }
        for (m, row) in filters.iter().enumerate() {
            let mut acc = 0.0;
            for &(k, w) in row {
                acc += w * power[k];
            }
            data[m * frames + t] = acc.max(params.log_floor).ln() as f32;
        }
    }

    if params.mean_normalize {
        for m in 0..params.bins {
            let row = &mut data[m * frames..(m + 1) * frames];
            let mean = row.iter().map(|&v| v as f64).sum::<f64>() / frames as f64;
            for v in row.iter_mut() {
                *v = (*v as f64 - mean) as f32;
            }
        }
    }

    if data.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite(utterance_id.to_string()));
    }
    Ok(MelSpectrogram::new(utterance_id, params.bins, frames, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn silence(samples: usize) -> WavAudio {
        WavAudio {
            sample_rate: 16000,
            samples: vec![0.0; samples],
        }
    }

    #[test]
    fn frame_count_formula_hand_case() {
        // 349 hops of 160 plus one 400-sample window -> exactly 350 frames
        let audio = silence(349 * 160 + 400);
        let spec = mel_spectrogram(&audio, "u", &MelParams::default()).unwrap();
        assert_eq!(spec.frames, 350);
        assert_eq!(spec.bins, 80);
    }

    #[test]
    fn frame_count_matches_formula_across_lengths() {
        let p = MelParams::default();
        for len in [400, 401, 559, 560, 561, 16000, 64000] {
            let spec = mel_spectrogram(&silence(len), "u", &p).unwrap();
            assert_eq!(spec.frames, 1 + (len - 400) / 160, "len {len}");
        }
    }

    #[test]
    fn too_short_audio_is_an_error() {
        let err = mel_spectrogram(&silence(399), "u", &MelParams::default()).unwrap_err();
        assert!(matches!(err, FeatureError::TooShort { samples: 399, window: 400 }));
    }

    #[test]
    fn digital_silence_hits_the_log_floor_everywhere() {
        let spec = mel_spectrogram(&silence(16000), "u", &MelParams::default()).unwrap();
        let floor = 1e-10f64.ln() as f32; // -23.025851
        assert!(spec.data.iter().all(|&v| v == floor));
        assert!((floor + 23.025_85).abs() < 1e-5);
    }

    #[test]
    fn pure_tone_concentrates_in_the_right_mel_bin() {
        let sr = 16000u32;
        let freq = 1000.0;
        let samples: Vec<f64> = (0..sr as usize)
            .map(|n| 0.5 * (2.0 * std::f64::consts::PI * freq * n as f64 / sr as f64).sin())
            .collect();
        let audio = WavAudio { sample_rate: sr, samples };
        let spec = mel_spectrogram(&audio, "tone", &MelParams::default()).unwrap();

        // expected bin: the filter whose peak is nearest 1 kHz, located
        // from the mel edge grid directly
        let (m_lo, m_hi) = (hz_to_mel(20.0), hz_to_mel(8000.0));
        let peak_hz = |m: usize| mel_to_hz(m_lo + (m_hi - m_lo) * (m + 1) as f64 / 81.0);
        let expected = (0..80)
            .min_by(|&a, &b| {
                (peak_hz(a) - freq)
                    .abs()
                    .total_cmp(&(peak_hz(b) - freq).abs())
            })
            .unwrap();

        for t in 0..spec.frames {
            let argmax = (0..80)
                .max_by(|&a, &b| spec.value(a, t).total_cmp(&spec.value(b, t)))
                .unwrap();
            assert!(
                (argmax as i64 - expected as i64).abs() <= 1,
                "frame {t}: argmax {argmax}, expected ~{expected}"
            );
        }
    }

    #[test]
    fn filterbank_rows_are_nonempty_with_increasing_peaks() {
        let filters = mel_filterbank(80, 20.0, 8000.0, 16000, 512);
        assert_eq!(filters.len(), 80);
        let mut last_peak = 0usize;
        for (m, row) in filters.iter().enumerate() {
            let sum: f64 = row.iter().map(|&(_, w)| w).sum();
            assert!(sum > 0.0, "filter {m} sums to {sum}");
            let peak = row
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|&(k, _)| k)
                .unwrap();
            assert!(peak >= last_peak, "filter {m} peak went backwards");
            last_peak = peak;
        }
    }

    #[test]
    fn mean_normalization_zeroes_row_means() {
        let sr = 16000u32;
        let samples: Vec<f64> = (0..16000)
            .map(|n| 0.3 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / sr as f64).sin())
            .collect();
        let audio = WavAudio { sample_rate: sr, samples };
        let params = MelParams {
            mean_normalize: true,
            ..MelParams::default()
        };
        let spec = mel_spectrogram(&audio, "u", &params).unwrap();
        for m in 0..spec.bins {
            let mean: f64 = (0..spec.frames).map(|t| spec.value(m, t) as f64).sum::<f64>()
                / spec.frames as f64;
            assert!(mean.abs() < 1e-4, "bin {m} mean {mean}");
        }
    }
}
