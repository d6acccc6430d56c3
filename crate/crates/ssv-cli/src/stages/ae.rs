//! `train-ae` and `extract-ae`: the nearest-neighbor autoencoder.
//!
//! Training reconstructs each training vector from its cosine neighbors'
//! vectors; extraction then maps *every* corpus vector through the frozen
//! encoder-decoder, producing the denoised vectors System-1 scores.

use crate::artifact::RunReport;
use crate::config::Ctx;
use crate::{invalid, require_file, Result};
use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use ssv_core::autoencoder::{
    build_training_pairs, extract_ae_vectors, train_ae, AEModel, AETrainConfig,
};
use ssv_core::features::read_manifest;
use ssv_core::nncore::{load_checkpoint, save_checkpoint};
use ssv_core::vectorspace::{read_vectors, write_vectors, SpeakerVector};
use std::collections::BTreeSet;

/// Everything needed to rebuild the model around its checkpoint.
#[derive(Debug, Serialize, Deserialize)]
struct AeMeta {
    dim: usize,
    hidden: Vec<usize>,
    config: AETrainConfig,
    /// Mean reconstruction loss per epoch.
    history: Vec<f64>,
}

pub fn train(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    require_file(&cfg.manifest_train())?;
    require_file(&cfg.vectors())?;

    let mut report = RunReport::start("train-ae", cfg.seed, &ctx.digest);
    report.input(&cfg.manifest_train())?;
    report.input(&cfg.vectors())?;

    let train_ids: BTreeSet<String> = read_manifest(&cfg.manifest_train())
        .map_err(invalid)?
        .into_iter()
        .map(|e| e.id)
        .collect();
    let vectors: Vec<SpeakerVector> = read_vectors(&cfg.vectors())
        .map_err(invalid)?
        .into_iter()
        .filter(|v| train_ids.contains(&v.id))
        .collect();

    let pairs = build_training_pairs(&vectors, cfg.ae.neighbor_k).map_err(invalid)?;
    let (model, history) = train_ae(&vectors, &pairs, &cfg.ae).map_err(invalid)?;

    std::fs::create_dir_all(cfg.models_dir())
        .with_context(|| format!("creating {}", cfg.models_dir().display()))?;
    save_checkpoint(&cfg.model_file("ae"), &model).map_err(invalid)?;
    let meta = AeMeta {
        dim: model.dim(),
        hidden: cfg.ae.hidden.clone(),
        config: cfg.ae.clone(),
        history: history.clone(),
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(cfg.model_meta("ae"), meta_json + "\n")
        .with_context(|| format!("writing {}", cfg.model_meta("ae").display()))?;

    report.output(&cfg.model_file("ae"))?;
    report.output(&cfg.model_meta("ae"))?;
    report.counter("train_vectors", vectors.len());
    report.counter("training_pairs", pairs.len());
    report.counter("first_loss", history.first().copied().unwrap_or(f64::NAN));
    report.counter("final_loss", history.last().copied().unwrap_or(f64::NAN));
    report.finish(&cfg.models_dir())
}

pub fn extract(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    require_file(&cfg.model_file("ae"))?;
    require_file(&cfg.model_meta("ae"))?;
    require_file(&cfg.vectors())?;

    let mut report = RunReport::start("extract-ae", cfg.seed, &ctx.digest);
    report.input(&cfg.model_file("ae"))?;
    report.input(&cfg.vectors())?;

    let meta: AeMeta = serde_json::from_str(
        &std::fs::read_to_string(cfg.model_meta("ae"))
            .with_context(|| format!("reading {}", cfg.model_meta("ae").display()))?,
    )
    .with_context(|| format!("parsing {}", cfg.model_meta("ae").display()))?;

    // fresh weights are placeholders; the checkpoint overwrites them all
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut model = AEModel::new(meta.dim, &meta.hidden, &mut rng).map_err(invalid)?;
    load_checkpoint(&cfg.model_file("ae"), &mut model).map_err(invalid)?;

    let vectors = read_vectors(&cfg.vectors()).map_err(invalid)?;
    let ae_vectors =
        extract_ae_vectors(&model, &vectors, meta.config.length_normalize).map_err(invalid)?;

    std::fs::create_dir_all(cfg.vectors_dir())
        .with_context(|| format!("creating {}", cfg.vectors_dir().display()))?;
    write_vectors(&cfg.ae_vectors(), &ae_vectors).map_err(invalid)?;

    report.output(&cfg.ae_vectors())?;
    report.counter("vectors", ae_vectors.len());
    report.finish(&cfg.vectors_dir())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Ctx, PipelineConfig};
    use crate::stages::corpus;

    fn ctx(root: &std::path::Path) -> Ctx {
        let mut cfg = PipelineConfig::default();
        cfg.paths.root = root.to_path_buf();
        cfg.corpus.num_speakers = 5;
        cfg.corpus.utts_per_speaker = 5;
        cfg.corpus.eval_utts_per_speaker = 2;
        cfg.corpus.trials_per_class = 5;
        cfg.corpus.duration_secs = 0.2;
        cfg.corpus.vector_dim = 30;
        cfg.ae.epochs = 5;
        cfg.ae.neighbor_k = 3;
        cfg.ae.batch_size = 16;
        cfg.ae.hidden = vec![16, 8, 16];
        Ctx::new(cfg)
    }

    #[test]
    fn round_trip_through_checkpoint_reproduces_training_output() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        corpus::run(&ctx).unwrap();

        let report = train(&ctx).unwrap();
        // 5 speakers x 3 train utts
        assert_eq!(report.counters["train_vectors"], serde_json::json!(15));
        let first = report.counters["first_loss"].as_f64().unwrap();
        let last = report.counters["final_loss"].as_f64().unwrap();
        assert!(last < first, "loss should fall: {first} -> {last}");

        extract(&ctx).unwrap();
        let out = read_vectors(&ctx.cfg.ae_vectors()).unwrap();
        // extraction covers the whole corpus, not just the training slice
        assert_eq!(out.len(), 25);
        assert_eq!(out[0].values.len(), 30);
        assert!(out.iter().all(|v| v.values.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn extract_before_train_names_the_missing_model() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        corpus::run(&ctx).unwrap();
        match extract(&ctx) {
            Err(crate::CliError::MissingInput(p)) => {
                assert!(p.to_string_lossy().ends_with("ae.ssvm"))
            }
            other => panic!("expected MissingInput, got {other:?}"),
        }
    }
}
