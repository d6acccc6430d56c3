//! `featurize`: log-mel spectrograms for every manifest utterance, cached
//! one file per utterance.
//!
//! The mel bin count always comes from the encoder profile, never from a
//! free-standing parameter, so features and model agree by construction.

use crate::artifact::{sha256_file, RunReport};
use crate::config::Ctx;
use crate::{invalid, require_file, Result};
use anyhow::Context;
use rayon::prelude::*;
use ssv_core::features::{mel_spectrogram, read_manifest, read_wav, write_feature_cache};

pub fn run(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    let manifest_path = cfg.manifest();
    require_file(&manifest_path)?;
    let params = cfg.mel_params()?;

    let features_dir = cfg.features_dir();
    std::fs::create_dir_all(&features_dir)
        .with_context(|| format!("creating {}", features_dir.display()))?;

    let mut report = RunReport::start("featurize", cfg.seed, &ctx.digest);
    report.input(&manifest_path)?;

    let entries = read_manifest(&manifest_path).map_err(invalid)?;
    let audio_root = manifest_path.parent().unwrap_or(std::path::Path::new("."));

    let frames: Vec<usize> = entries
        .par_iter()
        .map(|entry| {
            let wav = read_wav(&audio_root.join(&entry.path)).map_err(invalid)?;
            let spec = mel_spectrogram(&wav, &entry.id, &params).map_err(invalid)?;
            write_feature_cache(&cfg.feature_file(&entry.id), &spec).map_err(invalid)?;
            Ok(spec.frames)
        })
        .collect::<Result<_>>()?;

    // one digest-listing artifact instead of a sidecar per cache file
    let mut listing = String::new();
    for entry in &entries {
        let path = cfg.feature_file(&entry.id);
        listing.push_str(&format!("{} {}\n", entry.id, sha256_file(&path)?));
    }
    let listing_path = features_dir.join("features.digest");
    std::fs::write(&listing_path, listing)
        .with_context(|| format!("writing {}", listing_path.display()))?;
    report.output(&listing_path)?;

    report.counter("utterances", entries.len());
    report.counter("mel_bins", params.bins);
    report.counter("min_frames", frames.iter().min().copied().unwrap_or(0));
    report.counter("max_frames", frames.iter().max().copied().unwrap_or(0));
    report.finish(&features_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Ctx, PipelineConfig};
    use crate::stages::corpus;
    use ssv_core::features::read_feature_cache;

    fn ctx(root: &std::path::Path) -> Ctx {
        let mut cfg = PipelineConfig::default();
        cfg.paths.root = root.to_path_buf();
        cfg.corpus.num_speakers = 2;
        cfg.corpus.utts_per_speaker = 3;
        cfg.corpus.eval_utts_per_speaker = 2;
        cfg.corpus.trials_per_class = 1;
        cfg.corpus.duration_secs = 0.5;
        cfg.corpus.vector_dim = 10;
        Ctx::new(cfg)
    }

    #[test]
    fn features_cover_the_manifest_and_match_the_profile() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        corpus::run(&ctx).unwrap();
        let report = run(&ctx).unwrap();
        assert_eq!(report.counters["utterances"], serde_json::json!(6));
        assert_eq!(report.counters["mel_bins"], serde_json::json!(8));

        let spec = read_feature_cache(&ctx.cfg.feature_file("spk001_utt002"), "spk001_utt002")
            .unwrap();
        assert_eq!(spec.bins, 8);
        // 0.5 s at 16 kHz, 25 ms window / 10 ms hop -> (8000-400)/160+1
        assert_eq!(spec.frames, 48);
    }

    #[test]
    fn missing_manifest_is_reported_as_missing_input() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        match run(&ctx) {
            Err(crate::CliError::MissingInput(p)) => {
                assert!(p.ends_with("corpus/manifest.jsonl"))
            }
            other => panic!("expected MissingInput, got {other:?}"),
        }
    }
}
