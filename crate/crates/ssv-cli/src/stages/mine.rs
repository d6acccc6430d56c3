//! `mine`: cosine-space pair and triplet mining over the training
//! vectors.
//!
//! The anchor/impostor split is computed from utterance ids alone — the
//! speaker column of the manifest is deliberately not passed in, so the
//! split and everything mined from it stay label-free. Labels are read
//! once afterwards, only to *measure* purity for the report.

use crate::artifact::RunReport;
use crate::config::Ctx;
use crate::{invalid, require_file, Result};
use anyhow::Context;
use ssv_core::features::read_manifest;
use ssv_core::vectorspace::{
    mine_all, purity_stats, read_vectors, split_subsets, write_pairs, write_triplets,
    SpeakerVector,
};
use std::collections::BTreeMap;

pub fn run(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    require_file(&cfg.manifest_train())?;
    require_file(&cfg.vectors())?;

    let mut report = RunReport::start("mine", cfg.seed, &ctx.digest);
    report.input(&cfg.manifest_train())?;
    report.input(&cfg.vectors())?;

    let train = read_manifest(&cfg.manifest_train()).map_err(invalid)?;
    let all_vectors = read_vectors(&cfg.vectors()).map_err(invalid)?;

    // split over bare utterance ids: no speaker information
    let entries: Vec<(String, Option<String>)> =
        train.iter().map(|e| (e.id.clone(), None)).collect();
    let split = split_subsets(&entries, cfg.mining.split_fraction, cfg.seed).map_err(invalid)?;

    let by_id: BTreeMap<&str, &SpeakerVector> =
        all_vectors.iter().map(|v| (v.id.as_str(), v)).collect();
    let pick = |ids: &[String]| -> Result<Vec<SpeakerVector>> {
        ids.iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|v| (*v).clone())
                    .ok_or_else(|| {
                        crate::CliError::Invalid(anyhow::anyhow!(
                            "manifest id {id:?} has no vector in {}",
                            cfg.vectors().display()
                        ))
                    })
            })
            .collect()
    };
    let subset_a = pick(&split.subset_a)?;
    let subset_b = pick(&split.subset_b)?;

    let (artifacts, mining_report) =
        mine_all(&subset_a, &subset_b, &cfg.mining.config()).map_err(invalid)?;

    // measurement only: purity against the ground-truth speaker column
    let speakers: BTreeMap<String, String> = read_manifest(&cfg.manifest())
        .map_err(invalid)?
        .into_iter()
        .filter_map(|e| e.speaker.map(|s| (e.id, s)))
        .collect();
    let purity = purity_stats(&artifacts, &speakers);

    let mining_dir = cfg.mining_dir();
    std::fs::create_dir_all(&mining_dir)
        .with_context(|| format!("creating {}", mining_dir.display()))?;
    write_pairs(&cfg.pairs(), &artifacts.pairs).map_err(invalid)?;
    write_triplets(&cfg.triplets(), &artifacts.triplets).map_err(invalid)?;
    let subsets_json = serde_json::to_string_pretty(&split).expect("split serializes");
    std::fs::write(cfg.subsets(), subsets_json + "\n")
        .with_context(|| format!("writing {}", cfg.subsets().display()))?;

    report.output(&cfg.pairs())?;
    report.output(&cfg.triplets())?;
    report.output(&cfg.subsets())?;
    report.counter("subset_a", split.subset_a.len());
    report.counter("subset_b", split.subset_b.len());
    report.counter("mining", &mining_report);
    if let Some(p) = purity {
        report.counter("purity", p);
    }
    report.finish(&mining_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Ctx, PipelineConfig};
    use crate::stages::corpus;
    use ssv_core::vectorspace::read_pairs;

    fn ctx(root: &std::path::Path) -> Ctx {
        let mut cfg = PipelineConfig::default();
        cfg.paths.root = root.to_path_buf();
        cfg.corpus.num_speakers = 6;
        cfg.corpus.utts_per_speaker = 6;
        cfg.corpus.eval_utts_per_speaker = 2;
        cfg.corpus.trials_per_class = 4;
        cfg.corpus.duration_secs = 0.2;
        cfg.corpus.vector_dim = 50;
        cfg.mining.k = 2;
        Ctx::new(cfg)
    }

    #[test]
    fn mining_stays_inside_the_training_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        corpus::run(&ctx).unwrap();
        let report = run(&ctx).unwrap();

        // 24 train utterances split in half
        assert_eq!(report.counters["subset_a"], serde_json::json!(12));
        assert_eq!(report.counters["subset_b"], serde_json::json!(12));

        let train = read_manifest(&ctx.cfg.manifest_train()).unwrap();
        let train_ids: std::collections::BTreeSet<&str> =
            train.iter().map(|e| e.id.as_str()).collect();
        let pairs = read_pairs(&ctx.cfg.pairs()).unwrap();
        assert!(!pairs.is_empty());
        for p in &pairs {
            assert!(train_ids.contains(p.anchor.as_str()));
            assert!(train_ids.contains(p.other.as_str()));
        }
        assert!(report.counters.contains_key("purity"));
    }

    #[test]
    fn mining_without_a_corpus_names_the_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(dir.path());
        match run(&ctx) {
            Err(crate::CliError::MissingInput(p)) => {
                assert!(p.to_string_lossy().contains("manifest_train"))
            }
            other => panic!("expected MissingInput, got {other:?}"),
        }
    }
}
