//! Turning a trial list plus a vector collection into a [`ScoreSet`].

use super::types::{ScoreSet, Trial};
use super::EvalError;
use crate::vectorspace::{cosine_score, validate_collection, SpeakerVector};
use std::collections::BTreeMap;

/// Scores every trial by cosine between its enroll and test vectors.
///
/// Both sides of each trial must name a vector in `vectors`; the first
/// absent id is reported with its trial index.
pub fn score_trials(
    vectors: &[SpeakerVector],
    trials: &[Trial],
    system: impl Into<String>,
) -> Result<ScoreSet, EvalError> {
    validate_collection(vectors)?;
    if trials.is_empty() {
        return Err(EvalError::EmptyInput("trial list".into()));
    }
    let by_id: BTreeMap<&str, &[f64]> = vectors
        .iter()
        .map(|v| (v.id.as_str(), v.values.as_slice()))
        .collect();

    let mut entries = Vec::with_capacity(trials.len());
    for (index, trial) in trials.iter().enumerate() {
        let lookup = |id: &str| {
            by_id.get(id).copied().ok_or_else(|| EvalError::UnknownId {
                index,
                id: id.to_string(),
            })
        };
        let enroll = lookup(&trial.enroll)?;
        let test = lookup(&trial.test)?;
        entries.push((trial.clone(), cosine_score(enroll, test)?));
    }
    Ok(ScoreSet::new(system, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn self_trials_score_one_and_orthogonal_zero() {
        let vectors = vec![
            SpeakerVector::new("x", vec![3.0, 0.0]),
            SpeakerVector::new("y", vec![0.0, -2.0]),
        ];
        let trials = vec![
            Trial::unlabeled("x", "x"),
            Trial::unlabeled("x", "y"),
        ];
        let set = score_trials(&vectors, &trials, "cosine").unwrap();
        assert!((set.entries[0].1 - 1.0).abs() < 1e-12);
        assert!(set.entries[1].1.abs() < 1e-12);
    }

    #[test]
    fn matches_a_direct_cosine_on_random_trials() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let vectors: Vec<SpeakerVector> = (0..20)
            .map(|i| {
                let values = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                SpeakerVector::new(format!("u{i}"), values)
            })
            .collect();
        let trials: Vec<Trial> = (0..100)
            .map(|_| {
                let a = rng.gen_range(0..vectors.len());
                let b = rng.gen_range(0..vectors.len());
                Trial::unlabeled(vectors[a].id.clone(), vectors[b].id.clone())
            })
            .collect();

        let set = score_trials(&vectors, &trials, "cosine").unwrap();
        for (trial, score) in &set.entries {
            let find = |id: &str| &vectors.iter().find(|v| v.id == id).unwrap().values;
            let (x, y) = (find(&trial.enroll), find(&trial.test));
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!((score - dot / (nx * ny)).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_ids_report_the_trial_index() {
        let vectors = vec![SpeakerVector::new("x", vec![1.0])];
        let trials = vec![
            Trial::unlabeled("x", "x"),
            Trial::unlabeled("x", "ghost"),
        ];
        match score_trials(&vectors, &trials, "cosine") {
            Err(EvalError::UnknownId { index: 1, id }) => assert_eq!(id, "ghost"),
            other => panic!("expected UnknownId, got {other:?}"),
        }
    }

    #[test]
    fn labels_survive_scoring() {
        let vectors = vec![
            SpeakerVector::new("x", vec![1.0, 0.5]),
            SpeakerVector::new("y", vec![0.5, 1.0]),
        ];
        let trials = vec![Trial::labeled("x", "y", true)];
        let set = score_trials(&vectors, &trials, "cosine").unwrap();
        assert_eq!(set.entries[0].0.label, Some(true));
    }
}
