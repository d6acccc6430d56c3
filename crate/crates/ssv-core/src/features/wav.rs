//! RIFF/WAVE PCM-16 reading and writing.
//!
//! Only what the pipeline needs: 16-bit PCM, mono or stereo (stereo is
//! downmixed by averaging the channels). Unknown chunks are skipped, so
//! files with LIST/INFO metadata parse fine. Parse failures report the
//! byte offset where the structure went wrong.

use super::FeatureError;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Mono audio normalized to `[-1, 1]` (16-bit samples scaled by 1/32768).
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl WavAudio {
    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn fail(&self, detail: impl Into<String>) -> FeatureError {
        FeatureError::WavParse {
            path: self.path.display().to_string(),
            offset: self.pos,
            detail: detail.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FeatureError> {
        if self.pos + n > self.bytes.len() {
            return Err(self.fail(format!(
                "truncated while reading {what}: need {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Reads a PCM-16 WAV file into normalized mono samples.
pub fn read_wav(path: &Path) -> Result<WavAudio, FeatureError> {
    let bytes = std::fs::read(path)?;
    let mut c = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };

    if c.take(4, "RIFF tag")? != b"RIFF" {
        c.pos = 0;
        return Err(c.fail("not a RIFF file"));
    }
    c.u32("RIFF size")?;
    if c.take(4, "WAVE tag")? != b"WAVE" {
        c.pos -= 4;
        return Err(c.fail("RIFF file is not WAVE"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while c.pos < c.bytes.len() {
        let id: [u8; 4] = c.take(4, "chunk id")?.try_into().unwrap();
        let size = c.u32("chunk size")? as usize;
        let body = c.take(size, "chunk body")?;
        match &id {
            b"fmt " => {
                if size < 16 {
                    c.pos -= size;
                    return Err(c.fail(format!("fmt chunk is {size} bytes, need at least 16")));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {} // LIST, fact, cue, ... - skip
        }
        if size % 2 == 1 && c.pos < c.bytes.len() {
            c.pos += 1; // chunks are word-aligned
        }
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| c.fail("missing fmt chunk"))?;
    if format != 1 {
        return Err(c.fail(format!("format tag {format} is not PCM (1)")));
    }
    if bits != 16 {
        return Err(c.fail(format!("{bits}-bit samples unsupported, need 16")));
    }
    if !(1..=2).contains(&channels) {
        return Err(c.fail(format!("{channels} channels unsupported, need mono or stereo")));
    }
    if rate == 0 {
        return Err(c.fail("sample rate is zero"));
    }
    let data = data.ok_or_else(|| c.fail("missing data chunk"))?;

    let frame_bytes = 2 * channels as usize;
    if data.len() % frame_bytes != 0 {
        return Err(c.fail(format!(
            "data chunk of {} bytes is not a whole number of {frame_bytes}-byte frames",
            data.len()
        )));
    }
    let n_frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(n_frames);
    for frame in data.chunks_exact(frame_bytes) {
        let mut acc = 0.0;
        for ch in frame.chunks_exact(2) {
            acc += i16::from_le_bytes(ch.try_into().unwrap()) as f64;
        }
        samples.push(acc / channels as f64 / 32768.0);
    }
    Ok(WavAudio {
        sample_rate: rate,
        samples,
    })
}

/// Writes mono PCM-16. Samples are clamped to `[-1, 1]` and scaled by
/// 32768 (so +1.0 saturates at 32767).
pub fn write_wav_mono16(path: &Path, sample_rate: u32, samples: &[f64]) -> Result<(), FeatureError> {
    let data_len = samples.len() * 2;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len as u32).to_le_bytes())?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?; // PCM
    w.write_all(&1u16.to_le_bytes())?; // mono
    w.write_all(&sample_rate.to_le_bytes())?;
    w.write_all(&(sample_rate * 2).to_le_bytes())?; // byte rate
    w.write_all(&2u16.to_le_bytes())?; // block align
    w.write_all(&16u16.to_le_bytes())?;
    w.write_all(b"data")?;
    w.write_all(&(data_len as u32).to_le_bytes())?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}
