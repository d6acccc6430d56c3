//! On-disk formats for vectors, pairs, and triplets.
//!
//! Vectors are JSON lines, one `{"id": ..., "vec": [...]}` object per
//! line. Pairs and triplets are whitespace-separated text: `"<label 0|1>
//! <anchor_id> <other_id>"` and `"<anchor_id> <client_id> <impostor_id>"`.
//! Floats round-trip exactly (serde_json emits the shortest
//! representation that parses back to the same bits).

use super::types::{validate_collection, Pair, SpeakerVector, Triplet};
use super::VectorError;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

fn bad(path: &Path, line: usize, detail: impl Into<String>) -> VectorError {
    VectorError::BadRecord {
        path: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

pub fn write_vectors(path: &Path, vectors: &[SpeakerVector]) -> Result<(), VectorError> {
    validate_collection(vectors)?;
    let mut w = BufWriter::new(File::create(path)?);
    for v in vectors {
        let json = serde_json::to_string(v).expect("vector serialization cannot fail");
        writeln!(w, "{json}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vectors(path: &Path) -> Result<Vec<SpeakerVector>, VectorError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: SpeakerVector = serde_json::from_str(&line)
            .map_err(|e| bad(path, i + 1, format!("not a vector record: {e}")))?;
        out.push(v);
    }
    validate_collection(&out)?;
    Ok(out)
}

fn check_token(path: &Path, what: &str, token: &str) -> Result<(), VectorError> {
    if token.split_whitespace().count() != 1 {
        return Err(bad(path, 0, format!("{what} {token:?} is not a single token")));
    }
    Ok(())
}

pub fn write_pairs(path: &Path, pairs: &[Pair]) -> Result<(), VectorError> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in pairs {
        check_token(path, "anchor id", &p.anchor)?;
        check_token(path, "other id", &p.other)?;
        if p.label > 1 {
            return Err(bad(path, 0, format!("pair label {} not in {{0, 1}}", p.label)));
        }
        writeln!(w, "{} {} {}", p.label, p.anchor, p.other)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<Vec<Pair>, VectorError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [label, anchor, other] = fields[..] else {
            return Err(bad(path, i + 1, format!("expected 3 fields, got {}", fields.len())));
        };
        let label: u8 = match label {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(path, i + 1, format!("label {other:?} not 0 or 1"))),
        };
        out.push(Pair {
            label,
            anchor: anchor.to_string(),
            other: other.to_string(),
        });
    }
    Ok(out)
}

pub fn write_triplets(path: &Path, triplets: &[Triplet]) -> Result<(), VectorError> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in triplets {
        check_token(path, "anchor id", &t.anchor)?;
        check_token(path, "client id", &t.client)?;
        check_token(path, "impostor id", &t.impostor)?;
        writeln!(w, "{} {} {}", t.anchor, t.client, t.impostor)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_triplets(path: &Path) -> Result<Vec<Triplet>, VectorError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [anchor, client, impostor] = fields[..] else {
            return Err(bad(path, i + 1, format!("expected 3 fields, got {}", fields.len())));
        };
        if client == impostor {
            return Err(bad(path, i + 1, "client and impostor are the same utterance"));
        }
        out.push(Triplet {
            anchor: anchor.to_string(),
            client: client.to_string(),
            impostor: impostor.to_string(),
        });
    }
    Ok(out)
}
