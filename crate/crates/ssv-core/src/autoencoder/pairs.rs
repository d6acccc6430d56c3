//! Training-pair construction: every vector paired with each of its
//! top-k cosine neighbors.

use super::AeError;
use crate::vectorspace::{top_k_neighbors, SpeakerVector};
use std::collections::BTreeMap;

/// Returns `(anchor_index, neighbor_index)` pairs into `vectors`: for
/// each anchor, its k nearest neighbors by cosine (self excluded), in
/// rank order. The identity pair is never emitted - the model learns to
/// reconstruct what an utterance's neighborhood shares, not the
/// utterance itself.
pub fn build_training_pairs(
    vectors: &[SpeakerVector],
    k: usize,
) -> Result<Vec<(usize, usize)>, AeError> {
    if k == 0 {
        return Err(AeError::BadConfig("neighbor k must be >= 1".into()));
    }
    let index_of: BTreeMap<&str, usize> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (v.id.as_str(), i))
        .collect();
    let mut pairs = Vec::with_capacity(vectors.len() * k);
    for (i, anchor) in vectors.iter().enumerate() {
        let neighbors = top_k_neighbors(anchor, vectors, k, true)?;
        for (id, _) in neighbors {
            pairs.push((i, index_of[id.as_str()]));
        }
    }
    Ok(pairs)
}
