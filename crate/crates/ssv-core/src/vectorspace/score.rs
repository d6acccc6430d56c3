//! Cosine scoring and nearest-neighbor extraction.

use super::types::SpeakerVector;
use super::VectorError;
use crate::nncore::dot;

/// Cosine similarity `x . y / (||x|| ||y||)`, in `[-1, 1]`.
pub fn cosine_score(x: &[f64], y: &[f64]) -> Result<f64, VectorError> {
    if x.len() != y.len() {
        return Err(VectorError::DimMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(VectorError::EmptyInput("cosine of empty vectors".into()));
    }
    let xx = dot(x, x);
    let yy = dot(y, y);
    if xx == 0.0 || yy == 0.0 {
        return Err(VectorError::ZeroVector("cosine of a zero vector".into()));
    }
    // One sqrt of the product, not a product of sqrts: x scored against
    // itself then divides by exactly dot(x,x) and yields exactly 1.
    // Clamp because rounding can still push near-parallel pairs past 1.
    Ok((dot(x, y) / (xx * yy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks `pool` against `anchor` by cosine score and returns the top `k`
/// as `(id, score)`, descending; ties break toward the lexicographically
/// smaller id so results are reproducible. With `exclude_self`, pool
/// entries sharing the anchor's id are skipped first.
pub fn top_k_neighbors(
    anchor: &SpeakerVector,
    pool: &[SpeakerVector],
    k: usize,
    exclude_self: bool,
) -> Result<Vec<(String, f64)>, VectorError> {
    let mut scored = rank_all(anchor, pool, exclude_self)?;
    if scored.len() < k {
        return Err(VectorError::PoolTooSmall {
            requested: k,
            available: scored.len(),
        });
    }
    scored.truncate(k);
    Ok(scored)
}

/// All candidates scored and sorted (descending score, ascending id).
pub(crate) fn rank_all(
    anchor: &SpeakerVector,
    pool: &[SpeakerVector],
    exclude_self: bool,
) -> Result<Vec<(String, f64)>, VectorError> {
    let mut scored = Vec::with_capacity(pool.len());
    for cand in pool {
        if exclude_self && cand.id == anchor.id {
            continue;
        }
        scored.push((cand.id.clone(), cosine_score(&anchor.values, &cand.values)?));
    }
    scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}
