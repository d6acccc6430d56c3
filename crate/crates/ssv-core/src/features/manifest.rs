//! Corpus manifests: JSON lines of `{"id", "path", "speaker"?}`.
//!
//! `speaker` is present only for corpora with ground truth (the synthetic
//! one); the self-supervised pipeline never reads it for training, only
//! for subset splitting and purity audits.

use super::FeatureError;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Audio location, resolved relative to the manifest's directory.
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), FeatureError> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        let json = serde_json::to_string(e).expect("manifest entry serialization cannot fail");
        writeln!(w, "{json}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, FeatureError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| FeatureError::BadRecord {
            path: path.display().to_string(),
            line: i + 1,
            detail: format!("not a manifest record: {e}"),
        })?;
        if !seen.insert(entry.id.clone()) {
            return Err(FeatureError::BadRecord {
                path: path.display().to_string(),
                line: i + 1,
                detail: format!("duplicate utterance id {:?}", entry.id),
            });
        }
        out.push(entry);
    }
    if out.is_empty() {
        return Err(FeatureError::BadRecord {
            path: path.display().to_string(),
            line: 0,
            detail: "manifest is empty".into(),
        });
    }
    Ok(out)
}
