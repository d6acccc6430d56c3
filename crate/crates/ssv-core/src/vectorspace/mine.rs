//! Client/impostor mining over two disjoint subsets.
//!
//! Anchors come from subset A. Potential clients are the anchor's nearest
//! neighbors within A (excluding itself), kept when they score at or above
//! `client_threshold`. Potential impostors come from B only: candidates
//! scoring above `impostor_threshold` are removed, then the
//! highest-scoring survivors - the hardest negatives - are kept, at most
//! `k` of each per anchor.

use super::score::rank_all;
use super::types::{
    validate_collection, MinedAnchor, MiningArtifacts, MiningConfig, MiningReport, Pair,
    PurityStats, SpeakerVector, Triplet,
};
use super::VectorError;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

fn find<'a>(
    vectors: &'a [SpeakerVector],
    id: &str,
) -> Result<&'a SpeakerVector, VectorError> {
    vectors
        .iter()
        .find(|v| v.id == id)
        .ok_or_else(|| VectorError::UnknownId(id.to_string()))
}

/// Mines client ids for one anchor: its top-k neighbors within subset A,
/// filtered to cosine >= `client_threshold`. May return fewer than k ids,
/// or none at all when the neighborhood is too dissimilar.
pub fn mine_clients(
    anchor_id: &str,
    subset_a: &[SpeakerVector],
    config: &MiningConfig,
) -> Result<Vec<String>, VectorError> {
    config.validate()?;
    let anchor = find(subset_a, anchor_id)?;
    let mut ranked = rank_all(anchor, subset_a, true)?;
    ranked.truncate(config.k);
    Ok(ranked
        .into_iter()
        .filter(|(_, s)| *s >= config.client_threshold)
        .map(|(id, _)| id)
        .collect())
}

/// Mines impostor ids for one anchor: subset-B candidates scoring at most
/// `impostor_threshold`, hardest (highest cosine) first, at most k.
///
/// `config.impostor_rule` records which reading of the selection rule the
/// run intends; both names currently share these semantics.
pub fn mine_impostors(
    anchor_id: &str,
    subset_a: &[SpeakerVector],
    subset_b: &[SpeakerVector],
    config: &MiningConfig,
) -> Result<Vec<String>, VectorError> {
    config.validate()?;
    let anchor = find(subset_a, anchor_id)?;
    if subset_b.is_empty() {
        return Ok(Vec::new());
    }
    let ranked = rank_all(anchor, subset_b, false)?;
    Ok(ranked
        .into_iter()
        .filter(|(_, s)| *s <= config.impostor_threshold)
        .take(config.k)
        .map(|(id, _)| id)
        .collect())
}

/// Flattens per-anchor mining results into pair and triplet lists.
///
/// Pairs: every (anchor, client) with label 1 and (anchor, impostor) with
/// label 0. Triplets: by default a round-robin pairing `(client_{j mod c},
/// impostor_{j mod i})` capped at k per anchor, so the triplet set grows
/// linearly in k like the pair sets; `full_cross_product` emits every
/// combination instead.
pub fn build_pairs_and_triplets(
    mined: &[MinedAnchor],
    config: &MiningConfig,
) -> MiningArtifacts {
    let mut artifacts = MiningArtifacts::default();
    for m in mined {
        artifacts
            .neighbor_lists
            .insert(m.anchor.clone(), m.neighbors.clone());
        for c in &m.clients {
            artifacts.pairs.push(Pair {
                label: 1,
                anchor: m.anchor.clone(),
                other: c.clone(),
            });
        }
        for i in &m.impostors {
            artifacts.pairs.push(Pair {
                label: 0,
                anchor: m.anchor.clone(),
                other: i.clone(),
            });
        }
        let (nc, ni) = (m.clients.len(), m.impostors.len());
        if nc == 0 || ni == 0 {
            continue;
        }
        if config.full_cross_product {
            for c in &m.clients {
                for i in &m.impostors {
                    if c != i {
                        artifacts.triplets.push(Triplet {
                            anchor: m.anchor.clone(),
                            client: c.clone(),
                            impostor: i.clone(),
                        });
                    }
                }
            }
        } else {
            let count = config.k.min(nc.max(ni));
            for j in 0..count {
                let client = &m.clients[j % nc];
                let impostor = &m.impostors[j % ni];
                if client != impostor {
                    artifacts.triplets.push(Triplet {
                        anchor: m.anchor.clone(),
                        client: client.clone(),
                        impostor: impostor.clone(),
                    });
                }
            }
        }
    }
    artifacts
}

/// Runs the whole mining stage: every subset-A vector becomes an anchor,
/// processed independently (and in parallel), then flattened in sorted
/// anchor order so output files are reproducible byte for byte.
pub fn mine_all(
    subset_a: &[SpeakerVector],
    subset_b: &[SpeakerVector],
    config: &MiningConfig,
) -> Result<(MiningArtifacts, MiningReport), VectorError> {
    config.validate()?;
    validate_collection(subset_a)?;
    if !subset_b.is_empty() {
        validate_collection(subset_b)?;
        let ids_a: BTreeSet<&str> = subset_a.iter().map(|v| v.id.as_str()).collect();
        if let Some(shared) = subset_b.iter().find(|v| ids_a.contains(v.id.as_str())) {
            return Err(VectorError::BadRecord {
                path: "<subsets>".into(),
                line: 0,
                detail: format!("id {:?} appears in both subsets; A and B must be disjoint", shared.id),
            });
        }
    }

    let mut anchor_ids: Vec<&str> = subset_a.iter().map(|v| v.id.as_str()).collect();
    anchor_ids.sort_unstable();

    let mined: Result<Vec<MinedAnchor>, VectorError> = anchor_ids
        .par_iter()
        .map(|anchor_id| {
            let anchor = find(subset_a, anchor_id)?;
            let mut neighbors = rank_all(anchor, subset_a, true)?;
            neighbors.truncate(config.k);
            let clients = neighbors
                .iter()
                .filter(|(_, s)| *s >= config.client_threshold)
                .map(|(id, _)| id.clone())
                .collect();
            let impostors = mine_impostors(anchor_id, subset_a, subset_b, config)?;
            Ok(MinedAnchor {
                anchor: anchor_id.to_string(),
                neighbors,
                clients,
                impostors,
            })
        })
        .collect();
    let mined = mined?;

    let artifacts = build_pairs_and_triplets(&mined, config);
    let report = MiningReport {
        anchors_processed: mined.len(),
        anchors_without_clients: mined.iter().filter(|m| m.clients.is_empty()).count(),
        anchors_without_impostors: mined.iter().filter(|m| m.impostors.is_empty()).count(),
        client_pairs: artifacts.pairs.iter().filter(|p| p.label == 1).count(),
        impostor_pairs: artifacts.pairs.iter().filter(|p| p.label == 0).count(),
        triplets: artifacts.triplets.len(),
        purity: None,
    };
    Ok((artifacts, report))
}

/// Audits mined artifacts against known speaker labels. Returns `None`
/// when any involved utterance is missing from `speaker_of` (labels
/// unknown) or when there is nothing to audit. Ratios with an empty
/// denominator report 1.0 (vacuously pure).
pub fn purity_stats(
    artifacts: &MiningArtifacts,
    speaker_of: &BTreeMap<String, String>,
) -> Option<PurityStats> {
    if artifacts.pairs.is_empty() && artifacts.triplets.is_empty() {
        return None;
    }
    let spk = |id: &str| speaker_of.get(id);

    let mut client_total = 0usize;
    let mut client_same = 0usize;
    let mut impostor_total = 0usize;
    let mut impostor_diff = 0usize;
    for p in &artifacts.pairs {
        let (a, o) = (spk(&p.anchor)?, spk(&p.other)?);
        if p.label == 1 {
            client_total += 1;
            client_same += usize::from(a == o);
        } else {
            impostor_total += 1;
            impostor_diff += usize::from(a != o);
        }
    }
    let mut trip_valid = 0usize;
    for t in &artifacts.triplets {
        let (a, c, i) = (spk(&t.anchor)?, spk(&t.client)?, spk(&t.impostor)?);
        trip_valid += usize::from(a == c && a != i);
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Some(PurityStats {
        client_pair_purity: ratio(client_same, client_total),
        impostor_pair_purity: ratio(impostor_diff, impostor_total),
        triplet_validity: ratio(trip_valid, artifacts.triplets.len()),
    })
}
