//! Model serialization.
//!
//! Layout: `b"SSVM"` magic, u32 format version (little-endian), u64
//! manifest length, a JSON manifest listing `{name, shape}` for every
//! parameter in visit order, then the raw row-major f64 little-endian
//! payloads in the same order. The manifest makes files self-describing:
//! [`read_checkpoint`] can inspect one without constructing the model.

use super::param::{param_layout, Net};
use super::{NnError, Tensor};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SSVM";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    params: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
}

/// Writes every parameter of `net` to `path`.
pub fn save_checkpoint(path: &Path, net: &dyn Net) -> Result<(), NnError> {
    let manifest = Manifest {
        params: param_layout(net)
            .into_iter()
            .map(|(name, shape)| ManifestEntry { name, shape })
            .collect(),
    };
    let manifest_json = serde_json::to_vec(&manifest)
        .map_err(|e| NnError::Checkpoint(format!("manifest encoding failed: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(manifest_json.len() as u64).to_le_bytes())?;
    w.write_all(&manifest_json)?;
    let mut failed = None;
    net.visit_params(&mut |_, p| {
        if failed.is_none() {
            for &v in p.value.data() {
                if let Err(e) = w.write_all(&v.to_le_bytes()) {
                    failed = Some(e);
                    break;
                }
            }
        }
    });
    if let Some(e) = failed {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint as `(name, tensor)` pairs in stored order, without
/// needing the model it came from.
pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>, NnError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_fully(&mut r, &mut magic, path, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint(format!(
            "{}: bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?}",
            path.display()
        )));
    }
    let mut buf4 = [0u8; 4];
    read_fully(&mut r, &mut buf4, path, "version")?;
    let version = u32::from_le_bytes(buf4);
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "{}: unsupported version {version} (this build reads {CHECKPOINT_VERSION})",
            path.display()
        )));
    }
    let mut buf8 = [0u8; 8];
    read_fully(&mut r, &mut buf8, path, "manifest length")?;
    let manifest_len = u64::from_le_bytes(buf8) as usize;
    let mut manifest_json = vec![0u8; manifest_len];
    read_fully(&mut r, &mut manifest_json, path, "manifest")?;
    let manifest: Manifest = serde_json::from_slice(&manifest_json)
        .map_err(|e| NnError::Checkpoint(format!("{}: manifest is not valid JSON: {e}", path.display())))?;

    let mut out = Vec::with_capacity(manifest.params.len());
    for entry in manifest.params {
        let numel: usize = entry.shape.iter().product();
        let mut data = vec![0.0f64; numel];
        let mut bytes = vec![0u8; numel * 8];
        read_fully(&mut r, &mut bytes, path, &entry.name)?;
        for (v, chunk) in data.iter_mut().zip(bytes.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        out.push((entry.name, Tensor::from_vec(&entry.shape, data)?));
    }
    Ok(out)
}

/// Restores `net`'s parameters from `path`. The stored names and shapes
/// must match the model's layout exactly, in order - a checkpoint from a
/// differently configured model is rejected rather than partially applied.
pub fn load_checkpoint(path: &Path, net: &mut dyn Net) -> Result<(), NnError> {
    let stored = read_checkpoint(path)?;
    let layout = param_layout(net);
    if stored.len() != layout.len() {
        return Err(NnError::Checkpoint(format!(
            "{}: stores {} parameters, model has {}",
            path.display(),
            stored.len(),
            layout.len()
        )));
    }
    for ((sname, st), (mname, mshape)) in stored.iter().zip(&layout) {
        if sname != mname || st.shape() != &mshape[..] {
            return Err(NnError::Checkpoint(format!(
                "{}: parameter mismatch: file has {sname} {:?}, model expects {mname} {mshape:?}",
                path.display(),
                st.shape()
            )));
        }
    }
    let mut i = 0;
    net.visit_params_mut(&mut |_, p| {
        p.value = stored[i].1.clone();
        i += 1;
    });
    Ok(())
}

fn read_fully(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<(), NnError> {
    r.read_exact(buf).map_err(|e| {
        NnError::Checkpoint(format!("{}: truncated while reading {what}: {e}", path.display()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{Linear, Param};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct TwoLayer {
        a: Linear,
        b: Linear,
    }

    impl TwoLayer {
        fn new(seed: u64) -> Self {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            TwoLayer {
                a: Linear::new(3, 4, &mut rng),
                b: Linear::new(4, 2, &mut rng),
            }
        }
    }

    impl Net for TwoLayer {
        fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
            f("a.weight", &self.a.weight);
            f("a.bias", &self.a.bias);
            f("b.weight", &self.b.weight);
            f("b.bias", &self.b.bias);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
            f("a.weight", &mut self.a.weight);
            f("a.bias", &mut self.a.bias);
            f("b.weight", &mut self.b.weight);
            f("b.bias", &mut self.b.bias);
        }
    }

    #[test]
    fn round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ssvm");
        let src = TwoLayer::new(1);
        save_checkpoint(&path, &src).unwrap();

        let mut dst = TwoLayer::new(2);
        assert_ne!(src.a.weight.value.data(), dst.a.weight.value.data());
        load_checkpoint(&path, &mut dst).unwrap();
        assert_eq!(src.a.weight.value.data(), dst.a.weight.value.data());
        assert_eq!(src.b.bias.value.data(), dst.b.bias.value.data());
    }

    #[test]
    fn read_checkpoint_reports_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ssvm");
        save_checkpoint(&path, &TwoLayer::new(1)).unwrap();
        let stored = read_checkpoint(&path).unwrap();
        let names: Vec<&str> = stored.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["a.weight", "a.bias", "b.weight", "b.bias"]);
        assert_eq!(stored[0].1.shape(), &[3, 4]);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.ssvm");
        std::fs::write(&path, b"NOPE then some bytes").unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert!(matches!(err, NnError::Checkpoint(_)), "{err}");
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn mismatched_model_is_rejected() {
        struct OneParam(Param);
        impl Net for OneParam {
            fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
                f("only", &self.0);
            }
            fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
                f("only", &mut self.0);
            }
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ssvm");
        save_checkpoint(&path, &TwoLayer::new(1)).unwrap();
        let mut other = OneParam(Param::new(Tensor::zeros(&[3])));
        let err = load_checkpoint(&path, &mut other).unwrap_err();
        assert!(err.to_string().contains("4 parameters"));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ssvm");
        save_checkpoint(&path, &TwoLayer::new(1)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }
}
