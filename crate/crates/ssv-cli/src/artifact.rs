//! Artifact bookkeeping: digests, sidecars, and per-stage run reports.
//!
//! Every stage writes its outputs, then a `.meta.json` sidecar next to
//! each primary artifact (seed + config digest, enough to know which run
//! produced it) and one `<stage>.report.json` with input/output digests
//! and counters. Reports carry wall time, so determinism checks compare
//! everything *except* `*.report.json`.

use crate::Result;
use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex(&h.finalize())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)
        .with_context(|| format!("opening {} for hashing", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file
            .read(&mut buf)
            .with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(digest: &[u8]) -> String {
    let mut s = String::with_capacity(digest.len() * 2);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Written as `<artifact>.meta.json` next to each primary output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub stage: String,
    pub seed: u64,
    pub config_digest: String,
}

impl Sidecar {
    pub fn write(&self, artifact: &Path) -> Result<()> {
        let path = sidecar_path(artifact);
        let text = serde_json::to_string_pretty(self).expect("sidecar serializes");
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing sidecar {}", path.display()))?;
        Ok(())
    }
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

/// What one stage did: digests of what it read and wrote, plus whatever
/// counters the stage finds worth reporting (pair counts, losses, ...).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub stage: String,
    pub seed: u64,
    pub config_digest: String,
    pub wall_ms: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub counters: BTreeMap<String, serde_json::Value>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunReport {
    pub fn start(stage: &str, seed: u64, config_digest: &str) -> Self {
        RunReport {
            stage: stage.to_string(),
            seed,
            config_digest: config_digest.to_string(),
            wall_ms: 0,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counters: BTreeMap::new(),
            started: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Records the artifact digest and drops a sidecar beside it.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Sidecar {
            stage: self.stage.clone(),
            seed: self.seed,
            config_digest: self.config_digest.clone(),
        }
        .write(path)
    }

    pub fn counter(&mut self, key: &str, value: impl Serialize) {
        self.counters.insert(
            key.to_string(),
            serde_json::to_value(value).expect("counter serializes"),
        );
    }

    /// Stamps wall time and writes `<stage>.report.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<RunReport> {
        if let Some(t0) = self.started.take() {
            self.wall_ms = t0.elapsed().as_millis() as u64;
        }
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating report dir {}", dir.display()))?;
        let path = dir.join(format!("{}.report.json", self.stage));
        let text = serde_json::to_string_pretty(&self).expect("report serializes");
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing report {}", path.display()))?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_matches_known_vector() {
        // sha256("abc"), a fixture from the function's own test suite.
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn file_and_byte_digests_agree() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("blob.bin");
        let payload: Vec<u8> = (0..200_000u32).map(|i| (i % 251) as u8).collect();
        std::fs::write(&p, &payload).unwrap();
        assert_eq!(sha256_file(&p).unwrap(), sha256_bytes(&payload));
    }

    #[test]
    fn report_records_io_and_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, "in").unwrap();
        std::fs::write(&output, "out").unwrap();

        let mut report = RunReport::start("demo", 9, "cfg-digest");
        report.input(&input).unwrap();
        report.output(&output).unwrap();
        report.counter("examples", 3usize);
        let report = report.finish(dir.path()).unwrap();

        assert_eq!(report.inputs.len(), 1);
        assert_eq!(report.outputs.len(), 1);

        let sidecar: Sidecar = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("out.txt.meta.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(sidecar.stage, "demo");
        assert_eq!(sidecar.seed, 9);

        let reread: RunReport = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("demo.report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(reread.counters["examples"], serde_json::json!(3));
    }
}
