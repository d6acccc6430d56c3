//! Deterministic subset splitting.

use super::types::SubsetSplit;
use super::VectorError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

/// Splits a manifest into disjoint subsets A and B, with `fraction` of the
/// split units landing in A (at least one unit on each side).
///
/// Entries are `(utterance_id, speaker)`. When every entry carries a
/// speaker label - true for the synthetic corpus - the split is by
/// speaker, so no speaker's utterances straddle the two subsets and the
/// "impostors come from other speakers" assumption actually holds. On
/// unlabeled manifests (`None` speakers) the split is by utterance.
///
/// The same `(entries, fraction, seed)` always yields the same split;
/// input order does not matter because units are sorted before shuffling.
pub fn split_subsets(
    entries: &[(String, Option<String>)],
    fraction: f64,
    seed: u64,
) -> Result<SubsetSplit, VectorError> {
    if entries.is_empty() {
        return Err(VectorError::EmptyInput("split over an empty manifest".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(VectorError::EmptyInput(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (id, _) in entries {
        if !seen.insert(id.as_str()) {
            return Err(VectorError::BadId(format!("duplicate utterance id {id}")));
        }
    }

    let labeled = entries.iter().all(|(_, s)| s.is_some());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let (mut subset_a, mut subset_b) = if labeled {
        let mut by_speaker: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (id, spk) in entries {
            by_speaker
                .entry(spk.as_deref().expect("all labeled"))
                .or_default()
                .push(id);
        }
        let mut speakers: Vec<&str> = by_speaker.keys().copied().collect();
        if speakers.len() < 2 {
            return Err(VectorError::EmptyInput(
                "need at least 2 speakers for a by-speaker split".into(),
            ));
        }
        speakers.shuffle(&mut rng);
        let n_a = split_count(speakers.len(), fraction);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, spk) in speakers.iter().enumerate() {
            let target = if i < n_a { &mut a } else { &mut b };
            target.extend(by_speaker[spk].iter().map(|s| s.to_string()));
        }
        (a, b)
    } else {
        let mut ids: Vec<&str> = entries.iter().map(|(id, _)| id.as_str()).collect();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        if ids.len() < 2 {
            return Err(VectorError::EmptyInput(
                "need at least 2 utterances to split".into(),
            ));
        }
        let n_a = split_count(ids.len(), fraction);
        let a = ids[..n_a].iter().map(|s| s.to_string()).collect();
        let b = ids[n_a..].iter().map(|s| s.to_string()).collect();
        (a, b)
    };

    subset_a.sort_unstable();
    subset_b.sort_unstable();
    Ok(SubsetSplit { subset_a, subset_b })
}

fn split_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}
