//! Feature cache: one spectrogram per file.
//!
//! Layout: `b"MSPC"` magic, u32 bin count (little-endian), u32 frame
//! count, then `bins * frames` row-major f32 little-endian values. The
//! utterance id is not stored; it is the file stem by convention.

use super::mel::MelSpectrogram;
use super::FeatureError;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CACHE_MAGIC: &[u8; 4] = b"MSPC";

pub fn write_feature_cache(path: &Path, spec: &MelSpectrogram) -> Result<(), FeatureError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&(spec.bins as u32).to_le_bytes())?;
    w.write_all(&(spec.frames as u32).to_le_bytes())?;
    for &v in &spec.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_cache(path: &Path, utterance_id: &str) -> Result<MelSpectrogram, FeatureError> {
    let fail = |detail: String| FeatureError::Cache {
        path: path.display().to_string(),
        detail,
    };
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| fail(format!("truncated magic: {e}")))?;
    if &magic != CACHE_MAGIC {
        return Err(fail(format!("bad magic {magic:?}, expected {CACHE_MAGIC:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|e| fail(format!("truncated bins: {e}")))?;
    let bins = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(|e| fail(format!("truncated frames: {e}")))?;
    let frames = u32::from_le_bytes(b4) as usize;
    if bins == 0 || frames == 0 {
        return Err(fail(format!("degenerate shape {bins}x{frames}")));
    }

    let mut bytes = vec![0u8; bins * frames * 4];
    r.read_exact(&mut bytes)
        .map_err(|e| fail(format!("truncated payload for {bins}x{frames}: {e}")))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(fail("trailing bytes after payload".into()));
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite(utterance_id.to_string()));
    }
    Ok(MelSpectrogram::new(utterance_id, bins, frames, data))
}
