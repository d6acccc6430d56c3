//! The experiment configuration: one JSON document with per-stage
//! sections, plus the path layout stages use to hand artifacts to each
//! other.
//!
//! Every section (and every field) has a default, so a config file only
//! needs the values it changes. The top-level `seed` is the only seed:
//! it is copied into each training section before any stage runs, so one
//! number pins the whole experiment. Flags override file values, and the
//! digest of the *effective* config (after overrides) is what artifact
//! sidecars record.

use crate::{require_file, CliError, Result};
use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use ssv_core::autoencoder::AETrainConfig;
use ssv_core::eval::{DcfParams, FusionWeights};
use ssv_core::features::{MelParams, SynthConfig};
use ssv_core::siamese::{EncoderProfile, SiameseTrainConfig};
use ssv_core::vectorspace::{ImpostorRule, MiningConfig};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Master seed; overrides the per-section seed fields.
    pub seed: u64,
    /// Encoder profile name: "full" (the reference architecture) or
    /// "tiny" (desk-scale). Also decides the mel bin count.
    pub profile: String,
    pub paths: PathsSection,
    pub corpus: CorpusSection,
    pub mining: MiningSection,
    pub ae: AETrainConfig,
    pub siamese: SiameseTrainConfig,
    pub eval: EvalSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            profile: "tiny".into(),
            paths: PathsSection::default(),
            corpus: CorpusSection::default(),
            mining: MiningSection::default(),
            ae: AETrainConfig::default(),
            siamese: SiameseTrainConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Where artifacts live. Relative paths resolve against `root`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsSection {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub wav_dir: PathBuf,
    pub vectors: PathBuf,
    pub trials: PathBuf,
    pub features_dir: PathBuf,
    pub mining_dir: PathBuf,
    pub models_dir: PathBuf,
    pub vectors_dir: PathBuf,
    pub scores_dir: PathBuf,
    pub eval_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            root: "run".into(),
            manifest: "corpus/manifest.jsonl".into(),
            wav_dir: "corpus/wav".into(),
            vectors: "corpus/ivectors.jsonl".into(),
            trials: "corpus/trials.txt".into(),
            features_dir: "features".into(),
            mining_dir: "mining".into(),
            models_dir: "models".into(),
            vectors_dir: "vectors".into(),
            scores_dir: "scores".into(),
            eval_dir: "eval".into(),
        }
    }
}

/// Synthetic corpus shape plus the held-out evaluation slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    pub num_speakers: usize,
    pub utts_per_speaker: usize,
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub vector_dim: usize,
    pub vector_noise_sigma: f64,
    pub snr_db: f64,
    /// Utterances per speaker reserved for evaluation; trials are drawn
    /// only from these, so no trial utterance ever reaches training.
    pub eval_utts_per_speaker: usize,
    /// Target and nontarget trial counts (each), making a balanced list.
    pub trials_per_class: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            num_speakers: 20,
            utts_per_speaker: 10,
            duration_secs: 4.0,
            sample_rate: 16000,
            vector_dim: 400,
            vector_noise_sigma: 0.3,
            snr_db: 10.0,
            eval_utts_per_speaker: 4,
            trials_per_class: 100,
        }
    }
}

impl CorpusSection {
    pub fn synth_config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            num_speakers: self.num_speakers,
            utts_per_speaker: self.utts_per_speaker,
            seed,
            sample_rate: self.sample_rate,
            duration_secs: self.duration_secs,
            vector_dim: self.vector_dim,
            vector_noise_sigma: self.vector_noise_sigma,
            snr_db: self.snr_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_utts_per_speaker == 0 || self.eval_utts_per_speaker >= self.utts_per_speaker {
            return Err(CliError::Invalid(anyhow!(
                "eval_utts_per_speaker must be in [1, utts_per_speaker), got {} of {}",
                self.eval_utts_per_speaker,
                self.utts_per_speaker
            )));
        }
        if self.trials_per_class == 0 {
            return Err(CliError::Invalid(anyhow!("trials_per_class must be >= 1")));
        }
        Ok(())
    }
}

/// Mining parameters plus how the training vectors split into the anchor
/// subset and the impostor pool. The split is by utterance id only —
/// speaker labels never reach mining.
///
/// Mirrors [`MiningConfig`] field by field rather than embedding it, so
/// a partial config overrides single fields while the rest keep *these*
/// defaults (the library's own default leaves the impostor cap off).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningSection {
    pub split_fraction: f64,
    pub k: usize,
    pub client_threshold: f64,
    pub impostor_threshold: f64,
    pub impostor_rule: ImpostorRule,
    pub full_cross_product: bool,
}

impl Default for MiningSection {
    fn default() -> Self {
        MiningSection {
            split_fraction: 0.5,
            k: 10,
            client_threshold: 0.5,
            // The impostor cap matters here: subsets split by utterance,
            // so an anchor's own speaker can appear in the impostor pool,
            // and without the cap those would top the hardest-candidate
            // ranking. 0.6 sits between cross-speaker cosines (~0) and
            // same-speaker ones (~0.9) for the default corpus noise.
            impostor_threshold: 0.6,
            impostor_rule: ImpostorRule::HardestTopK,
            full_cross_product: false,
        }
    }
}

impl MiningSection {
    pub fn config(&self) -> MiningConfig {
        MiningConfig {
            k: self.k,
            client_threshold: self.client_threshold,
            impostor_threshold: self.impostor_threshold,
            impostor_rule: self.impostor_rule,
            full_cross_product: self.full_cross_product,
        }
    }
}

/// Evaluation and fusion parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub dcf: DcfParams,
    /// Fusion weights used when `fuse` runs without tuned weights.
    pub weights: FusionWeights,
    pub grid_step: f64,
    /// Min-max normalize each system's scores before fusing. Off by
    /// default: the fusion formula operates on raw scores.
    pub normalize: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            dcf: DcfParams::default(),
            weights: FusionWeights::default(),
            grid_step: 0.01,
            normalize: false,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        require_file(path)?;
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Copies the master seed into every section that owns one.
    pub fn propagate_seed(&mut self) {
        self.ae.seed = self.seed;
        self.siamese.seed = self.seed;
    }

    pub fn encoder_profile(&self) -> Result<EncoderProfile> {
        EncoderProfile::by_name(&self.profile).map_err(crate::invalid)
    }

    /// Spectrogram parameters for this run: the profile decides the bin
    /// count so features always match what the encoder expects.
    pub fn mel_params(&self) -> Result<MelParams> {
        Ok(MelParams {
            bins: self.encoder_profile()?.mel_bins,
            ..MelParams::default()
        })
    }

    /// Canonical JSON of the effective config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.paths.root.join(p)
        }
    }

    /// `corpus/manifest.jsonl` -> `corpus/manifest_train.jsonl` etc.
    fn manifest_variant(&self, suffix: &str) -> PathBuf {
        let m = self.resolve(&self.paths.manifest);
        let stem = m.file_stem().unwrap_or_default().to_string_lossy();
        let ext = m.extension().map(|e| e.to_string_lossy().into_owned());
        let name = match ext {
            Some(e) => format!("{stem}_{suffix}.{e}"),
            None => format!("{stem}_{suffix}"),
        };
        m.with_file_name(name)
    }

    pub fn manifest(&self) -> PathBuf {
        self.resolve(&self.paths.manifest)
    }
    pub fn manifest_train(&self) -> PathBuf {
        self.manifest_variant("train")
    }
    pub fn manifest_eval(&self) -> PathBuf {
        self.manifest_variant("eval")
    }
    pub fn wav_dir(&self) -> PathBuf {
        self.resolve(&self.paths.wav_dir)
    }
    pub fn vectors(&self) -> PathBuf {
        self.resolve(&self.paths.vectors)
    }
    pub fn trials(&self) -> PathBuf {
        self.resolve(&self.paths.trials)
    }
    pub fn features_dir(&self) -> PathBuf {
        self.resolve(&self.paths.features_dir)
    }
    pub fn feature_file(&self, id: &str) -> PathBuf {
        self.features_dir().join(format!("{id}.mspc"))
    }
    pub fn mining_dir(&self) -> PathBuf {
        self.resolve(&self.paths.mining_dir)
    }
    pub fn pairs(&self) -> PathBuf {
        self.mining_dir().join("pairs.txt")
    }
    pub fn triplets(&self) -> PathBuf {
        self.mining_dir().join("triplets.txt")
    }
    pub fn subsets(&self) -> PathBuf {
        self.mining_dir().join("subsets.json")
    }
    pub fn models_dir(&self) -> PathBuf {
        self.resolve(&self.paths.models_dir)
    }
    pub fn model_file(&self, name: &str) -> PathBuf {
        self.models_dir().join(format!("{name}.ssvm"))
    }
    pub fn model_meta(&self, name: &str) -> PathBuf {
        self.models_dir().join(format!("{name}.json"))
    }
    pub fn vectors_dir(&self) -> PathBuf {
        self.resolve(&self.paths.vectors_dir)
    }
    pub fn ae_vectors(&self) -> PathBuf {
        self.vectors_dir().join("ae_vectors.jsonl")
    }
    pub fn embeddings(&self) -> PathBuf {
        self.vectors_dir().join("embeddings.jsonl")
    }
    pub fn scores_dir(&self) -> PathBuf {
        self.resolve(&self.paths.scores_dir)
    }
    pub fn score_file(&self, system: &str) -> PathBuf {
        self.scores_dir().join(format!("{system}.txt"))
    }
    pub fn eval_dir(&self) -> PathBuf {
        self.resolve(&self.paths.eval_dir)
    }
    pub fn weights_file(&self) -> PathBuf {
        self.eval_dir().join("weights.json")
    }
    pub fn surface_file(&self) -> PathBuf {
        self.eval_dir().join("surface.json")
    }
    pub fn metrics_file(&self, system: &str) -> PathBuf {
        self.eval_dir().join(format!("metrics_{system}.json"))
    }
    pub fn summary_file(&self) -> PathBuf {
        self.eval_dir().join("summary.json")
    }
}

/// The effective configuration a stage runs under: seeds already
/// propagated, digest computed over the canonical JSON. Stages take this
/// instead of a raw `PipelineConfig` so nothing can run against a
/// half-resolved config.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub cfg: PipelineConfig,
    /// Digest of the effective config with the path layout normalized
    /// out: where a run writes does not change what it computes, so two
    /// runs of one experiment into different directories share a digest.
    pub digest: String,
}

impl Ctx {
    pub fn new(mut cfg: PipelineConfig) -> Ctx {
        cfg.propagate_seed();
        let mut normalized = cfg.clone();
        normalized.paths = PathsSection::default();
        let digest = crate::artifact::sha256_bytes(normalized.canonical_json().as_bytes());
        Ctx { cfg, digest }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_parses_to_defaults() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.profile, "tiny");
        assert_eq!(cfg.corpus.num_speakers, 20);
    }

    #[test]
    fn partial_config_overrides_only_named_fields() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"seed": 7, "mining": {"k": 3}, "corpus": {"num_speakers": 5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.mining.k, 3);
        // the other mining fields keep their section defaults
        assert_eq!(cfg.mining.impostor_threshold, 0.6);
        assert_eq!(cfg.mining.split_fraction, 0.5);
        assert_eq!(cfg.corpus.num_speakers, 5);
        assert_eq!(cfg.corpus.utts_per_speaker, 10);
    }

    #[test]
    fn seed_propagates_into_sections() {
        let mut cfg = PipelineConfig {
            seed: 42,
            ..PipelineConfig::default()
        };
        cfg.propagate_seed();
        assert_eq!(cfg.ae.seed, 42);
        assert_eq!(cfg.siamese.seed, 42);
    }

    #[test]
    fn paths_resolve_against_root_and_derive_split_manifests() {
        let cfg = PipelineConfig {
            paths: PathsSection {
                root: "/work".into(),
                ..PathsSection::default()
            },
            ..PipelineConfig::default()
        };
        assert_eq!(
            cfg.manifest(),
            PathBuf::from("/work/corpus/manifest.jsonl")
        );
        assert_eq!(
            cfg.manifest_eval(),
            PathBuf::from("/work/corpus/manifest_eval.jsonl")
        );
        assert_eq!(cfg.feature_file("u1"), PathBuf::from("/work/features/u1.mspc"));
        let abs = PipelineConfig {
            paths: PathsSection {
                root: "/work".into(),
                vectors: "/elsewhere/v.jsonl".into(),
                ..PathsSection::default()
            },
            ..PipelineConfig::default()
        };
        assert_eq!(abs.vectors(), PathBuf::from("/elsewhere/v.jsonl"));
    }

    #[test]
    fn profile_decides_mel_bins() {
        let tiny = PipelineConfig::default();
        assert_eq!(tiny.mel_params().unwrap().bins, 8);
        let full = PipelineConfig {
            profile: "full".into(),
            ..PipelineConfig::default()
        };
        assert_eq!(full.mel_params().unwrap().bins, 80);
        let bad = PipelineConfig {
            profile: "huge".into(),
            ..PipelineConfig::default()
        };
        assert!(bad.encoder_profile().is_err());
    }

    #[test]
    fn corpus_validation_rejects_degenerate_eval_slices() {
        let mut c = CorpusSection::default();
        c.eval_utts_per_speaker = 10;
        assert!(c.validate().is_err());
        c.eval_utts_per_speaker = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn ctx_digest_tracks_effective_config() {
        let a = Ctx::new(PipelineConfig::default());
        let b = Ctx::new(PipelineConfig::default());
        assert_eq!(a.digest, b.digest);
        assert_eq!(a.cfg.ae.seed, a.cfg.seed);

        let c = Ctx::new(PipelineConfig {
            seed: 1,
            ..PipelineConfig::default()
        });
        assert_ne!(a.digest, c.digest);
    }

    #[test]
    fn ctx_digest_ignores_where_the_run_lives() {
        let here = Ctx::new(PipelineConfig::default());
        let there = Ctx::new(PipelineConfig {
            paths: PathsSection {
                root: "/somewhere/else".into(),
                ..PathsSection::default()
            },
            ..PipelineConfig::default()
        });
        assert_eq!(here.digest, there.digest);
    }
}
