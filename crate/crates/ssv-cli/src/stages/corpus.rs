//! `synth-corpus`: renders the synthetic corpus — wav files, manifests,
//! reference vectors, and a balanced trial list.
//!
//! The manifest splits by utterance index: the last `eval_utts_per_speaker`
//! utterances of every speaker are held out, and trials draw only from
//! those, so no trial utterance is ever seen by training.

use crate::artifact::RunReport;
use crate::config::Ctx;
use crate::{invalid, Result};
use anyhow::{anyhow, Context};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use ssv_core::eval::{write_trials, Trial};
use ssv_core::features::{speaker_profile, synth_utterance, write_manifest, write_wav_mono16, ManifestEntry};
use ssv_core::vectorspace::{write_vectors, SpeakerVector};

pub fn run(ctx: &Ctx) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    cfg.corpus.validate()?;
    let synth = cfg.corpus.synth_config(cfg.seed);
    synth.validate().map_err(invalid)?;

    let wav_dir = cfg.wav_dir();
    std::fs::create_dir_all(&wav_dir)
        .with_context(|| format!("creating {}", wav_dir.display()))?;
    let manifest_path = cfg.manifest();
    if let Some(parent) = manifest_path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }

    let mut report = RunReport::start("synth-corpus", cfg.seed, &ctx.digest);

    let mut entries = Vec::new();
    let mut vectors = Vec::new();
    for s in 0..synth.num_speakers {
        let profile = speaker_profile(&synth, s);
        for u in 0..synth.utts_per_speaker {
            let utt = synth_utterance(&synth, &profile, u);
            let wav_name = format!("{}.wav", utt.id);
            write_wav_mono16(&wav_dir.join(&wav_name), synth.sample_rate, &utt.audio.samples)
                .map_err(invalid)?;
            // path relative to the manifest's directory
            entries.push(ManifestEntry {
                id: utt.id.clone(),
                path: format!("wav/{wav_name}"),
                speaker: Some(utt.speaker.clone()),
            });
            vectors.push(SpeakerVector::new(utt.id, utt.ivector));
        }
    }

    let eval_per = cfg.corpus.eval_utts_per_speaker;
    let train_per = synth.utts_per_speaker - eval_per;
    let is_eval = |idx: usize| idx % synth.utts_per_speaker >= train_per;
    let train: Vec<ManifestEntry> = entries
        .iter()
        .enumerate()
        .filter(|(i, _)| !is_eval(*i))
        .map(|(_, e)| e.clone())
        .collect();
    let eval: Vec<ManifestEntry> = entries
        .iter()
        .enumerate()
        .filter(|(i, _)| is_eval(*i))
        .map(|(_, e)| e.clone())
        .collect();

    let trials = build_trials(cfg, &eval)?;

    write_manifest(&manifest_path, &entries).map_err(invalid)?;
    write_manifest(&cfg.manifest_train(), &train).map_err(invalid)?;
    write_manifest(&cfg.manifest_eval(), &eval).map_err(invalid)?;
    write_vectors(&cfg.vectors(), &vectors).map_err(invalid)?;
    write_trials(&cfg.trials(), &trials).map_err(invalid)?;

    report.output(&manifest_path)?;
    report.output(&cfg.manifest_train())?;
    report.output(&cfg.manifest_eval())?;
    report.output(&cfg.vectors())?;
    report.output(&cfg.trials())?;
    report.counter("speakers", synth.num_speakers);
    report.counter("utterances", entries.len());
    report.counter("train_utterances", train.len());
    report.counter("eval_utterances", eval.len());
    report.counter("trials", trials.len());
    report.finish(manifest_path.parent().unwrap())
}

/// Balanced trials over the held-out utterances: `trials_per_class`
/// same-speaker pairs and as many cross-speaker pairs, sampled without
/// replacement from the full candidate sets.
fn build_trials(cfg: &crate::config::PipelineConfig, eval: &[ManifestEntry]) -> Result<Vec<Trial>> {
    let mut targets = Vec::new();
    let mut nontargets = Vec::new();
    for (i, a) in eval.iter().enumerate() {
        for b in eval.iter().skip(i + 1) {
            if a.speaker == b.speaker {
                targets.push(Trial::labeled(&a.id, &b.id, true));
            } else {
                nontargets.push(Trial::labeled(&a.id, &b.id, false));
            }
        }
    }
    let n = cfg.corpus.trials_per_class;
    if targets.len() < n || nontargets.len() < n {
        return Err(crate::CliError::Invalid(anyhow!(
            "eval slice yields {} target and {} nontarget candidates, need {} of each; \
             raise eval_utts_per_speaker or lower trials_per_class",
            targets.len(),
            nontargets.len(),
            n
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x7472_6961); // "tria"
    let mut picked: Vec<Trial> = targets
        .choose_multiple(&mut rng, n)
        .cloned()
        .chain(nontargets.choose_multiple(&mut rng, n).cloned())
        .collect();
    picked.shuffle(&mut rng);
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Ctx, PipelineConfig};

    fn small_ctx(root: &std::path::Path) -> Ctx {
        let mut cfg = PipelineConfig::default();
        cfg.paths.root = root.to_path_buf();
        cfg.corpus.num_speakers = 4;
        cfg.corpus.utts_per_speaker = 5;
        cfg.corpus.eval_utts_per_speaker = 2;
        cfg.corpus.trials_per_class = 3;
        cfg.corpus.duration_secs = 0.5;
        cfg.corpus.vector_dim = 20;
        Ctx::new(cfg)
    }

    #[test]
    fn corpus_writes_every_artifact_with_consistent_counts() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = small_ctx(dir.path());
        let report = run(&ctx).unwrap();

        assert_eq!(report.counters["utterances"], serde_json::json!(20));
        assert_eq!(report.counters["train_utterances"], serde_json::json!(12));
        assert_eq!(report.counters["eval_utterances"], serde_json::json!(8));
        assert_eq!(report.counters["trials"], serde_json::json!(6));

        let manifest = ssv_core::features::read_manifest(&ctx.cfg.manifest()).unwrap();
        assert_eq!(manifest.len(), 20);
        assert!(manifest.iter().all(|e| e.speaker.is_some()));
        let wav = ctx.cfg.wav_dir().join("spk000_utt000.wav");
        assert!(wav.is_file());

        let vectors = ssv_core::vectorspace::read_vectors(&ctx.cfg.vectors()).unwrap();
        assert_eq!(vectors.len(), 20);
        assert_eq!(vectors[0].values.len(), 20);
    }

    #[test]
    fn trials_are_balanced_and_use_only_held_out_utterances() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = small_ctx(dir.path());
        run(&ctx).unwrap();

        let trials = ssv_core::eval::read_trials(ctx.cfg.trials()).unwrap();
        let eval = ssv_core::features::read_manifest(&ctx.cfg.manifest_eval()).unwrap();
        let eval_ids: std::collections::BTreeSet<&str> =
            eval.iter().map(|e| e.id.as_str()).collect();

        let on = trials.iter().filter(|t| t.label == Some(true)).count();
        let off = trials.iter().filter(|t| t.label == Some(false)).count();
        assert_eq!(on, 3);
        assert_eq!(off, 3);
        for t in &trials {
            assert!(eval_ids.contains(t.enroll.as_str()), "{} not held out", t.enroll);
            assert!(eval_ids.contains(t.test.as_str()), "{} not held out", t.test);
        }
    }

    #[test]
    fn asking_for_more_trials_than_candidates_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_ctx(dir.path()).cfg;
        // 4 speakers x C(2,2)=1 same-speaker pair each -> 4 candidates
        cfg.corpus.trials_per_class = 5;
        let err = run(&Ctx::new(cfg)).unwrap_err();
        assert!(err.to_string().contains("candidates"));
    }
}
