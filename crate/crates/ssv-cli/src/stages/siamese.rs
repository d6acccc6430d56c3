//! `train-double`, `train-triple`, `extract-embeddings`: the two siamese
//! networks over the mined pairs and triplets.
//!
//! Both models share one encoder architecture chosen by the profile; the
//! double-branch adds a classifier head (System-2 scores pairs directly),
//! the triple-branch trains by triplet margin and is used as an embedding
//! extractor (System-3 scores embeddings by cosine).

use crate::artifact::RunReport;
use crate::config::Ctx;
use crate::{invalid, require_file, Result};
use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use ssv_core::features::{read_feature_cache, read_manifest, MelSpectrogram};
use ssv_core::nncore::{load_checkpoint, save_checkpoint};
use ssv_core::siamese::{
    extract_embeddings as core_extract, train_double as core_train_double,
    train_triple as core_train_triple, DoubleBranchModel, EncoderProfile, SiameseTrainConfig,
    TripleBranchModel, TripleHistory,
};
use ssv_core::vectorspace::{read_pairs, read_triplets, write_vectors};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Serialize, Deserialize)]
struct DoubleMeta {
    profile: EncoderProfile,
    head_hidden: Vec<usize>,
    config: SiameseTrainConfig,
    /// Mean BCE per epoch.
    history: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TripleMeta {
    profile: EncoderProfile,
    margin: f64,
    config: SiameseTrainConfig,
    history: TripleHistory,
}

/// Loads the feature cache for exactly the utterance ids a stage needs.
fn load_features(ctx: &Ctx, ids: &BTreeSet<String>) -> Result<BTreeMap<String, MelSpectrogram>> {
    let mut features = BTreeMap::new();
    for id in ids {
        let path = ctx.cfg.feature_file(id);
        require_file(&path)?;
        features.insert(id.clone(), read_feature_cache(&path, id).map_err(invalid)?);
    }
    Ok(features)
}

pub fn train_double(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    require_file(&cfg.pairs())?;
    let mut report = RunReport::start("train-double", cfg.seed, &ctx.digest);
    report.input(&cfg.pairs())?;

    let pairs = read_pairs(&cfg.pairs()).map_err(invalid)?;
    let ids: BTreeSet<String> = pairs
        .iter()
        .flat_map(|p| [p.anchor.clone(), p.other.clone()])
        .collect();
    let features = load_features(ctx, &ids)?;

    let profile = cfg.encoder_profile()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.siamese.seed);
    let mut model =
        DoubleBranchModel::with_default_head(profile.clone(), &mut rng).map_err(invalid)?;
    let history = core_train_double(&mut model, &pairs, &features, &cfg.siamese).map_err(invalid)?;

    std::fs::create_dir_all(cfg.models_dir())
        .with_context(|| format!("creating {}", cfg.models_dir().display()))?;
    save_checkpoint(&cfg.model_file("double"), &model).map_err(invalid)?;
    let meta = DoubleMeta {
        profile,
        head_hidden: model.head_hidden(),
        config: cfg.siamese.clone(),
        history: history.clone(),
    };
    std::fs::write(
        cfg.model_meta("double"),
        serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n",
    )
    .with_context(|| format!("writing {}", cfg.model_meta("double").display()))?;

    report.output(&cfg.model_file("double"))?;
    report.output(&cfg.model_meta("double"))?;
    report.counter("pairs", pairs.len());
    report.counter("first_loss", history.first().copied().unwrap_or(f64::NAN));
    report.counter("final_loss", history.last().copied().unwrap_or(f64::NAN));
    report.finish(&cfg.models_dir())
}

pub fn train_triple(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    require_file(&cfg.triplets())?;
    let mut report = RunReport::start("train-triple", cfg.seed, &ctx.digest);
    report.input(&cfg.triplets())?;

    let triplets = read_triplets(&cfg.triplets()).map_err(invalid)?;
    let ids: BTreeSet<String> = triplets
        .iter()
        .flat_map(|t| [t.anchor.clone(), t.client.clone(), t.impostor.clone()])
        .collect();
    let features = load_features(ctx, &ids)?;

    let profile = cfg.encoder_profile()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.siamese.seed);
    let mut model =
        TripleBranchModel::new(profile.clone(), cfg.siamese.margin, &mut rng).map_err(invalid)?;
    let history =
        core_train_triple(&mut model, &triplets, &features, &cfg.siamese).map_err(invalid)?;

    std::fs::create_dir_all(cfg.models_dir())
        .with_context(|| format!("creating {}", cfg.models_dir().display()))?;
    save_checkpoint(&cfg.model_file("triple"), &model).map_err(invalid)?;
    let meta = TripleMeta {
        profile,
        margin: model.margin(),
        config: cfg.siamese.clone(),
        history: history.clone(),
    };
    std::fs::write(
        cfg.model_meta("triple"),
        serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n",
    )
    .with_context(|| format!("writing {}", cfg.model_meta("triple").display()))?;

    report.output(&cfg.model_file("triple"))?;
    report.output(&cfg.model_meta("triple"))?;
    report.counter("triplets", triplets.len());
    report.counter(
        "first_loss",
        history.epoch_loss.first().copied().unwrap_or(f64::NAN),
    );
    report.counter(
        "final_loss",
        history.epoch_loss.last().copied().unwrap_or(f64::NAN),
    );
    report.counter(
        "final_active_fraction",
        history.active_fraction.last().copied().unwrap_or(f64::NAN),
    );
    report.finish(&cfg.models_dir())
}

/// Rebuilds the trained triple-branch model from checkpoint + metadata.
pub fn load_triple(ctx: &Ctx) -> Result<TripleBranchModel> {
    let cfg = &ctx.cfg;
    require_file(&cfg.model_file("triple"))?;
    require_file(&cfg.model_meta("triple"))?;
    let meta: TripleMeta = serde_json::from_str(
        &std::fs::read_to_string(cfg.model_meta("triple"))
            .with_context(|| format!("reading {}", cfg.model_meta("triple").display()))?,
    )
    .with_context(|| format!("parsing {}", cfg.model_meta("triple").display()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut model = TripleBranchModel::new(meta.profile, meta.margin, &mut rng).map_err(invalid)?;
    load_checkpoint(&cfg.model_file("triple"), &mut model).map_err(invalid)?;
    Ok(model)
}

/// Rebuilds the trained double-branch model from checkpoint + metadata.
pub fn load_double(ctx: &Ctx) -> Result<DoubleBranchModel> {
    let cfg = &ctx.cfg;
    require_file(&cfg.model_file("double"))?;
    require_file(&cfg.model_meta("double"))?;
    let meta: DoubleMeta = serde_json::from_str(
        &std::fs::read_to_string(cfg.model_meta("double"))
            .with_context(|| format!("reading {}", cfg.model_meta("double").display()))?,
    )
    .with_context(|| format!("parsing {}", cfg.model_meta("double").display()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut model = DoubleBranchModel::new(meta.profile, &meta.head_hidden, &mut rng)
        .map_err(invalid)?;
    load_checkpoint(&cfg.model_file("double"), &mut model).map_err(invalid)?;
    Ok(model)
}

pub fn extract_embeddings(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    require_file(&cfg.manifest_eval())?;
    let mut report = RunReport::start("extract-embeddings", cfg.seed, &ctx.digest);
    report.input(&cfg.manifest_eval())?;
    report.input(&cfg.model_file("triple"))?;

    let model = load_triple(ctx)?;
    let entries = read_manifest(&cfg.manifest_eval()).map_err(invalid)?;
    let mut features = Vec::with_capacity(entries.len());
    for e in &entries {
        let path = cfg.feature_file(&e.id);
        require_file(&path)?;
        features.push((e.id.clone(), read_feature_cache(&path, &e.id).map_err(invalid)?));
    }

    let embeddings = core_extract(&model, &features).map_err(invalid)?;
    std::fs::create_dir_all(cfg.vectors_dir())
        .with_context(|| format!("creating {}", cfg.vectors_dir().display()))?;
    write_vectors(&cfg.embeddings(), &embeddings).map_err(invalid)?;

    report.output(&cfg.embeddings())?;
    report.counter("utterances", embeddings.len());
    report.counter("embed_dim", embeddings.first().map_or(0, |v| v.values.len()));
    report.finish(&cfg.vectors_dir())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Ctx, PipelineConfig};
    use crate::stages::{corpus, featurize, mine};
    use ssv_core::vectorspace::read_vectors;

    /// Small corpus, short utterances, two epochs: enough to exercise the
    /// full file contract without real training.
    fn ctx(root: &std::path::Path) -> Ctx {
        let mut cfg = PipelineConfig::default();
        cfg.paths.root = root.to_path_buf();
        cfg.corpus.num_speakers = 4;
        cfg.corpus.utts_per_speaker = 5;
        cfg.corpus.eval_utts_per_speaker = 2;
        cfg.corpus.trials_per_class = 4;
        cfg.corpus.duration_secs = 0.5;
        cfg.corpus.vector_dim = 30;
        cfg.mining.k = 2;
        cfg.siamese.epochs = 2;
        cfg.siamese.batch_size = 8;
        cfg.siamese.crop_frames = 16;
        Ctx::new(cfg)
    }

    fn prepare(ctx: &Ctx) {
        corpus::run(ctx).unwrap();
        featurize::run(ctx).unwrap();
        mine::run(ctx).unwrap();
    }

    #[test]
    fn double_branch_trains_and_reloads_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        prepare(&ctx);

        let report = train_double(&ctx).unwrap();
        assert!(report.counters["pairs"].as_u64().unwrap() > 0);

        let model = load_double(&ctx).unwrap();
        let id = read_pairs(&ctx.cfg.pairs()).unwrap()[0].anchor.clone();
        let spec = read_feature_cache(&ctx.cfg.feature_file(&id), &id).unwrap();
        let crop = ssv_core::features::crop_at(&spec, 16, 0);
        let p = model.forward(&crop, &crop).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn triple_branch_extracts_one_embedding_per_eval_utterance() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        prepare(&ctx);

        train_triple(&ctx).unwrap();
        extract_embeddings(&ctx).unwrap();

        let embeddings = read_vectors(&ctx.cfg.embeddings()).unwrap();
        assert_eq!(embeddings.len(), 8); // 4 speakers x 2 eval utts
        let eval = read_manifest(&ctx.cfg.manifest_eval()).unwrap();
        for (v, e) in embeddings.iter().zip(&eval) {
            assert_eq!(v.id, e.id);
            assert_eq!(v.values.len(), 25); // tiny profile embedding
        }
    }

    #[test]
    fn training_without_mining_names_the_missing_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        corpus::run(&ctx).unwrap();
        featurize::run(&ctx).unwrap();
        match train_double(&ctx) {
            Err(crate::CliError::MissingInput(p)) => {
                assert!(p.ends_with("mining/pairs.txt"))
            }
            other => panic!("expected MissingInput, got {other:?}"),
        }
    }
}
