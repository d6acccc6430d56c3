//! Inference: embedding extraction and pair scoring on full utterances.
//!
//! Training uses random crops, but at evaluation time the whole
//! utterance goes through the encoder (the attention pool absorbs the
//! length difference). Utterances shorter than the pooling minimum are
//! wrap-padded by tiling, matching the crop semantics.

use std::collections::BTreeMap;

use super::{DoubleBranchModel, SiameseError, TripleBranchModel};
use crate::features::{crop_at, MelSpectrogram};
use crate::nncore::Tensor;
use crate::vectorspace::SpeakerVector;
use rayon::prelude::*;

/// Full-utterance feature matrix, wrap-padded up to `min_frames`.
fn full_input(spec: &MelSpectrogram, min_frames: usize) -> Tensor {
    crop_at(spec, spec.frames.max(min_frames), 0)
}

/// Embeds every utterance with the shared encoder branch; one unit-norm
/// vector per entry, in input order. Inference is pure, so utterances
/// are processed in parallel.
pub fn extract_embeddings(
    model: &TripleBranchModel,
    features: &[(String, MelSpectrogram)],
) -> Result<Vec<SpeakerVector>, SiameseError> {
    if features.is_empty() {
        return Err(SiameseError::EmptyInput("no utterances to embed".into()));
    }
    let min = model.encoder().profile().min_frames();
    features
        .par_iter()
        .map(|(id, spec)| {
            let e = model.embed(&full_input(spec, min))?;
            Ok(SpeakerVector::new(id.clone(), e.data().to_vec()))
        })
        .collect()
}

/// Scores `(enroll, test)` id pairs with the double-branch classifier on
/// full utterances; scores land in (0, 1), in trial order.
pub fn score_trials_double(
    model: &DoubleBranchModel,
    features: &BTreeMap<String, MelSpectrogram>,
    trials: &[(String, String)],
) -> Result<Vec<f64>, SiameseError> {
    if trials.is_empty() {
        return Err(SiameseError::EmptyInput("no trials to score".into()));
    }
    let min = model.encoder().profile().min_frames();
    trials
        .par_iter()
        .map(|(enroll, test)| {
            let a = features
                .get(enroll)
                .ok_or_else(|| SiameseError::MissingFeatures(enroll.clone()))?;
            let b = features
                .get(test)
                .ok_or_else(|| SiameseError::MissingFeatures(test.clone()))?;
            model.forward(&full_input(a, min), &full_input(b, min))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siamese::EncoderProfile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn toy_spec(id: &str, frames: usize, seed: u64) -> MelSpectrogram {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let data = (0..8 * frames).map(|_| rng.gen_range(-2.0..2.0)).collect();
        MelSpectrogram::new(id, 8, frames, data)
    }

    fn tiny_triple(seed: u64) -> TripleBranchModel {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        TripleBranchModel::new(EncoderProfile::tiny(), 0.2, &mut rng).unwrap()
    }

    #[test]
    fn embeddings_come_back_unit_norm_in_order() {
        let model = tiny_triple(1);
        let features: Vec<(String, MelSpectrogram)> = (0..5)
            .map(|i| (format!("utt{i}"), toy_spec(&format!("utt{i}"), 20 + i, i as u64)))
            .collect();
        let out = extract_embeddings(&model, &features).unwrap();
        assert_eq!(out.len(), 5);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(v.id, format!("utt{i}"));
            assert_eq!(v.values.len(), 25);
            let norm = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "norm {norm}");
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let model = tiny_triple(2);
        let features = vec![("a".to_string(), toy_spec("a", 33, 3))];
        let once = extract_embeddings(&model, &features).unwrap();
        let twice = extract_embeddings(&model, &features).unwrap();
        assert_eq!(once[0].values, twice[0].values);
    }

    #[test]
    fn short_utterances_are_tiled_up_to_the_minimum() {
        let model = tiny_triple(4);
        let spec = toy_spec("short", 3, 5);
        let direct = model.embed(&crop_at(&spec, 8, 0)).unwrap();
        let through =
            extract_embeddings(&model, &[("short".to_string(), spec)]).unwrap();
        assert_eq!(through[0].values, direct.data());
    }

    #[test]
    fn double_scoring_keeps_trial_order_and_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let model =
            DoubleBranchModel::with_default_head(EncoderProfile::tiny(), &mut rng).unwrap();
        let mut features = BTreeMap::new();
        for i in 0..3 {
            features.insert(format!("u{i}"), toy_spec(&format!("u{i}"), 24, 7 + i as u64));
        }
        let trials = vec![
            ("u0".to_string(), "u1".to_string()),
            ("u1".to_string(), "u2".to_string()),
            ("u0".to_string(), "u0".to_string()),
        ];
        let scores = score_trials_double(&model, &features, &trials).unwrap();
        assert_eq!(scores.len(), 3);
        assert!(scores.iter().all(|s| *s > 0.0 && *s < 1.0));

        let again = score_trials_double(&model, &features, &trials).unwrap();
        assert_eq!(scores, again);

        let bad = vec![("u0".to_string(), "nope".to_string())];
        assert!(matches!(
            score_trials_double(&model, &features, &bad),
            Err(SiameseError::MissingFeatures(id)) if id == "nope"
        ));
    }
}
