//! `score`, `evaluate`, `fuse`, `tune-fusion`: trial scoring and metrics.
//!
//! Three scoring backends share one trial list and one score file format:
//!   s1      cosine over autoencoder vectors
//!   s2      double-branch classifier probability on feature pairs
//!   s3      cosine over triple-branch embeddings
//!   ivector cosine over the raw reference vectors (diagnostic baseline)

use crate::artifact::RunReport;
use crate::config::Ctx;
use crate::{invalid, require_file, Result};
use anyhow::Context;
use ssv_core::eval::{
    attach_labels, compute_eer, compute_min_dcf, fuse_scores, min_max_normalize, read_scores,
    read_trials, score_trials, tune_fusion, write_metrics, write_scores, FusionWeights,
    MetricsReport, ScoreSet, Trial,
};
use ssv_core::features::read_feature_cache;
use ssv_core::siamese::score_trials_double;
use ssv_core::vectorspace::read_vectors;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

fn load_trials(ctx: &Ctx) -> Result<Vec<Trial>> {
    let path = ctx.cfg.trials();
    require_file(&path)?;
    read_trials(&path).map_err(invalid)
}

pub fn score(ctx: &Ctx, system: &str) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    let trials = load_trials(ctx)?;
    let mut report = RunReport::start(&format!("score-{system}"), cfg.seed, &ctx.digest);
    report.input(&cfg.trials())?;

    let set = match system {
        "s1" => cosine_system(system, &cfg.ae_vectors(), &trials, &mut report)?,
        "s3" => cosine_system(system, &cfg.embeddings(), &trials, &mut report)?,
        "ivector" => cosine_system(system, &cfg.vectors(), &trials, &mut report)?,
        "s2" => double_system(ctx, &trials, &mut report)?,
        other => {
            return Err(crate::CliError::Invalid(anyhow::anyhow!(
                "unknown system {other:?} (expected s1, s2, s3, or ivector)"
            )))
        }
    };

    std::fs::create_dir_all(cfg.scores_dir())
        .with_context(|| format!("creating {}", cfg.scores_dir().display()))?;
    let out = cfg.score_file(system);
    write_scores(&out, &set).map_err(invalid)?;
    report.output(&out)?;
    report.counter("trials", set.len());
    report.finish(&cfg.scores_dir())
}

fn cosine_system(
    system: &str,
    vectors_path: &Path,
    trials: &[Trial],
    report: &mut RunReport,
) -> Result<ScoreSet> {
    require_file(vectors_path)?;
    report.input(vectors_path)?;
    let vectors = read_vectors(vectors_path).map_err(invalid)?;
    score_trials(&vectors, trials, system).map_err(invalid)
}

fn double_system(ctx: &Ctx, trials: &[Trial], report: &mut RunReport) -> Result<ScoreSet> {
    let model = crate::stages::siamese::load_double(ctx)?;
    report.input(&ctx.cfg.model_file("double"))?;

    let ids: BTreeSet<&str> = trials
        .iter()
        .flat_map(|t| [t.enroll.as_str(), t.test.as_str()])
        .collect();
    let mut features = BTreeMap::new();
    for id in ids {
        let path = ctx.cfg.feature_file(id);
        require_file(&path)?;
        features.insert(id.to_string(), read_feature_cache(&path, id).map_err(invalid)?);
    }

    let pairs: Vec<(String, String)> = trials
        .iter()
        .map(|t| (t.enroll.clone(), t.test.clone()))
        .collect();
    let scores = score_trials_double(&model, &features, &pairs).map_err(invalid)?;
    Ok(ScoreSet::new(
        "s2",
        trials.iter().cloned().zip(scores).collect(),
    ))
}

pub fn evaluate(
    ctx: &Ctx,
    scores: &Path,
    trials: Option<&Path>,
    out: Option<&Path>,
) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    require_file(scores)?;
    let system = scores
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scores".into());
    let trials_path = trials.map(Path::to_path_buf).unwrap_or_else(|| cfg.trials());
    require_file(&trials_path)?;

    let mut report = RunReport::start(&format!("evaluate-{system}"), cfg.seed, &ctx.digest);
    report.input(scores)?;
    report.input(&trials_path)?;

    let set = read_scores(scores, &system).map_err(invalid)?;
    let trial_list = read_trials(&trials_path).map_err(invalid)?;
    let labeled = attach_labels(&set, &trial_list).map_err(invalid)?;

    let (eer, eer_threshold) = compute_eer(&labeled).map_err(invalid)?;
    let (min_dcf, dcf_threshold) = compute_min_dcf(&labeled, &cfg.eval.dcf).map_err(invalid)?;
    let metrics = MetricsReport {
        eer,
        eer_threshold,
        min_dcf,
        dcf_threshold,
        params: cfg.eval.dcf,
    };

    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.metrics_file(&system));
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    write_metrics(&out_path, &metrics).map_err(invalid)?;

    report.output(&out_path)?;
    report.counter("eer", eer);
    report.counter("min_dcf", min_dcf);
    report.finish(&cfg.eval_dir())
}

fn read_system_scores(ctx: &Ctx, system: &str, normalize: bool) -> Result<ScoreSet> {
    let path = ctx.cfg.score_file(system);
    require_file(&path)?;
    let set = read_scores(&path, system).map_err(invalid)?;
    if normalize {
        min_max_normalize(&set).map_err(invalid)
    } else {
        Ok(set)
    }
}

/// Weight precedence: explicit flags, then an explicit weights file, then
/// tuned weights if present in the run directory, then the config.
fn effective_weights(
    ctx: &Ctx,
    flag_weights: Option<FusionWeights>,
    weights_file: Option<&Path>,
) -> Result<(FusionWeights, &'static str)> {
    if let Some(w) = flag_weights {
        return Ok((w, "flags"));
    }
    let explicit = weights_file.map(Path::to_path_buf);
    let fallback = ctx.cfg.weights_file();
    let (path, source) = match explicit {
        Some(p) => {
            require_file(&p)?;
            (p, "weights-file")
        }
        None if fallback.is_file() => (fallback, "tuned"),
        None => return Ok((ctx.cfg.eval.weights, "config")),
    };
    let w: FusionWeights = serde_json::from_str(
        &std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?,
    )
    .with_context(|| format!("parsing {}", path.display()))?;
    Ok((w, source))
}

pub fn fuse(
    ctx: &Ctx,
    flag_weights: Option<FusionWeights>,
    weights_file: Option<&Path>,
    normalize: Option<bool>,
) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    let normalize = normalize.unwrap_or(cfg.eval.normalize);
    let (weights, source) = effective_weights(ctx, flag_weights, weights_file)?;

    let mut report = RunReport::start("fuse", cfg.seed, &ctx.digest);
    let s1 = read_system_scores(ctx, "s1", normalize)?;
    let s2 = read_system_scores(ctx, "s2", normalize)?;
    let s3 = read_system_scores(ctx, "s3", normalize)?;
    for s in ["s1", "s2", "s3"] {
        report.input(&cfg.score_file(s))?;
    }

    let fused = fuse_scores(&s1, &s2, &s3, &weights).map_err(invalid)?;
    std::fs::create_dir_all(cfg.scores_dir())
        .with_context(|| format!("creating {}", cfg.scores_dir().display()))?;
    let out = cfg.score_file("fusion");
    write_scores(&out, &fused).map_err(invalid)?;

    report.output(&out)?;
    report.counter("alpha", weights.alpha);
    report.counter("beta", weights.beta);
    report.counter("weights_source", source);
    report.counter("normalized", normalize);
    report.finish(&cfg.scores_dir())
}

pub fn tune(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    let trials = load_trials(ctx)?;
    let normalize = cfg.eval.normalize;

    let mut report = RunReport::start("tune-fusion", cfg.seed, &ctx.digest);
    let mut sets = Vec::new();
    for s in ["s1", "s2", "s3"] {
        let set = read_system_scores(ctx, s, normalize)?;
        report.input(&cfg.score_file(s))?;
        sets.push(attach_labels(&set, &trials).map_err(invalid)?);
    }

    let (weights, surface) =
        tune_fusion(&sets[0], &sets[1], &sets[2], &cfg.eval.dcf, cfg.eval.grid_step)
            .map_err(invalid)?;

    std::fs::create_dir_all(cfg.eval_dir())
        .with_context(|| format!("creating {}", cfg.eval_dir().display()))?;
    std::fs::write(
        cfg.weights_file(),
        serde_json::to_string_pretty(&weights).expect("weights serialize") + "\n",
    )
    .with_context(|| format!("writing {}", cfg.weights_file().display()))?;
    std::fs::write(
        cfg.surface_file(),
        serde_json::to_string_pretty(&surface).expect("surface serializes") + "\n",
    )
    .with_context(|| format!("writing {}", cfg.surface_file().display()))?;

    report.output(&cfg.weights_file())?;
    report.output(&cfg.surface_file())?;
    report.counter("alpha", weights.alpha);
    report.counter("beta", weights.beta);
    report.counter("cells", surface.cells.len());
    report.finish(&cfg.eval_dir())
}
