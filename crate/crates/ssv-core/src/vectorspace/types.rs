//! Domain types for the vector space and mining stages.

use super::VectorError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One utterance's fixed-length vector representation.
///
/// The dimension is whatever the producing stage emits (400 for the
/// reference i-vectors and ae-vectors); a collection must be homogeneous
/// and every value finite, which [`validate_collection`] enforces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerVector {
    pub id: String,
    #[serde(rename = "vec")]
    pub values: Vec<f64>,
}

impl SpeakerVector {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        SpeakerVector {
            id: id.into(),
            values,
        }
    }
}

/// Checks a collection for use as a scoring pool: non-empty, one shared
/// dimension, finite values, nonzero norms, and whitespace-free ids.
pub fn validate_collection(vectors: &[SpeakerVector]) -> Result<(), VectorError> {
    let first = vectors
        .first()
        .ok_or_else(|| VectorError::EmptyInput("vector collection".into()))?;
    let dim = first.values.len();
    for v in vectors {
        if v.id.split_whitespace().count() != 1 {
            return Err(VectorError::BadId(v.id.clone()));
        }
        if v.values.len() != dim {
            return Err(VectorError::DimMismatch {
                left: dim,
                right: v.values.len(),
            });
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(VectorError::NonFinite(v.id.clone()));
        }
        if v.values.iter().all(|&x| x == 0.0) {
            return Err(VectorError::ZeroVector(v.id.clone()));
        }
    }
    Ok(())
}

/// Two disjoint utterance-id subsets of a training manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetSplit {
    pub subset_a: Vec<String>,
    pub subset_b: Vec<String>,
}

/// How impostor candidates interact with `impostor_threshold`.
///
/// Both rules currently share one meaning - candidates scoring above the
/// threshold are removed, then the hardest (highest-scoring) survivors are
/// kept - because it is genuinely unclear whether high-scoring
/// cross-subset matches should count as hard negatives or be discarded as
/// probable same-speaker noise. The two names exist so configs can record
/// which reading they intend if the semantics ever diverge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpostorRule {
    HardestTopK,
    TopKBelowThreshold,
}

/// Mining parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Neighbors per anchor, and the per-anchor cap on mined clients,
    /// impostors, and triplets.
    pub k: usize,
    /// Minimum cosine score a potential client must reach.
    pub client_threshold: f64,
    /// Maximum cosine score a potential impostor may have; +1 disables
    /// the cap, leaving pure hardest-top-k.
    pub impostor_threshold: f64,
    pub impostor_rule: ImpostorRule,
    /// Emit every client x impostor combination instead of capping
    /// triplets at k per anchor by round-robin pairing.
    pub full_cross_product: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            k: 10,
            client_threshold: 0.5,
            impostor_threshold: 1.0,
            impostor_rule: ImpostorRule::HardestTopK,
            full_cross_product: false,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), VectorError> {
        if self.k == 0 {
            return Err(VectorError::EmptyInput("mining k must be >= 1".into()));
        }
        for (name, t) in [
            ("client_threshold", self.client_threshold),
            ("impostor_threshold", self.impostor_threshold),
        ] {
            if !(-1.0..=1.0).contains(&t) {
                return Err(VectorError::EmptyInput(format!(
                    "{name} {t} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// A mined training pair: `label` is 1 for (anchor, client) and 0 for
/// (anchor, impostor).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub label: u8,
    pub anchor: String,
    pub other: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: String,
    pub client: String,
    pub impostor: String,
}

/// Per-anchor mining result, before flattening into pair/triplet lists.
#[derive(Debug, Clone)]
pub struct MinedAnchor {
    pub anchor: String,
    /// Ranked candidate neighbors (id, cosine), before thresholding.
    pub neighbors: Vec<(String, f64)>,
    pub clients: Vec<String>,
    pub impostors: Vec<String>,
}

/// Everything mining produces for one run.
#[derive(Debug, Clone, Default)]
pub struct MiningArtifacts {
    /// Anchor id -> ranked neighbor list (id, cosine score).
    pub neighbor_lists: BTreeMap<String, Vec<(String, f64)>>,
    pub pairs: Vec<Pair>,
    pub triplets: Vec<Triplet>,
}

/// Label-based audit of mined pairs; only computable on corpora that know
/// their speakers (the synthetic corpus does, real unlabeled data do not).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PurityStats {
    /// Fraction of label-1 pairs whose two utterances share a speaker.
    pub client_pair_purity: f64,
    /// Fraction of label-0 pairs whose two utterances differ in speaker.
    pub impostor_pair_purity: f64,
    /// Fraction of triplets with a same-speaker client AND a
    /// different-speaker impostor.
    pub triplet_validity: f64,
}

/// Counts reported after a mining run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningReport {
    pub anchors_processed: usize,
    pub anchors_without_clients: usize,
    pub anchors_without_impostors: usize,
    pub client_pairs: usize,
    pub impostor_pairs: usize,
    pub triplets: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purity: Option<PurityStats>,
}
