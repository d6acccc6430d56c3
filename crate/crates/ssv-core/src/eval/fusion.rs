//! Score-level fusion of three systems and fusion-weight tuning.
//!
//! The fused score is `((s1*alpha + s2*(1-alpha)) * beta) + s3*(1-beta)`
//! — a partition of unity in the three weights, so equal inputs pass
//! through unchanged. Scores are fused raw by default: the formula is an
//! operating-point choice, not a calibration. [`min_max_normalize`]
//! exists for callers who want each system squashed to [0, 1] first.

use super::metrics::{eer_from_scores, min_dcf_from_scores};
use super::types::{DcfParams, FusionWeights, ScoreSet, Trial};
use super::EvalError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-trial affine combination of three aligned score sets.
pub fn fuse_scores(
    s1: &ScoreSet,
    s2: &ScoreSet,
    s3: &ScoreSet,
    weights: &FusionWeights,
) -> Result<ScoreSet, EvalError> {
    weights.validate()?;
    s1.validate()?;
    s1.check_aligned(s2)?;
    s1.check_aligned(s3)?;
    s2.validate()?;
    s3.validate()?;

    let (a, b) = (weights.alpha, weights.beta);
    let entries = s1
        .entries
        .iter()
        .zip(&s2.entries)
        .zip(&s3.entries)
        .map(|(((trial, v1), (_, v2)), (_, v3))| {
            let fused = (v1 * a + v2 * (1.0 - a)) * b + v3 * (1.0 - b);
            (trial.clone(), fused)
        })
        .collect();
    Ok(ScoreSet::new("fusion", entries))
}

/// Rescales one system's scores to [0, 1] by min and max.
pub fn min_max_normalize(set: &ScoreSet) -> Result<ScoreSet, EvalError> {
    set.validate()?;
    let lo = set
        .entries
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::INFINITY, f64::min);
    let hi = set
        .entries
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(EvalError::DegenerateScores(format!(
            "system '{}' scored every trial {lo}; min-max has no range",
            set.system
        )));
    }
    let entries = set
        .entries
        .iter()
        .map(|(t, s)| (t.clone(), (s - lo) / (hi - lo)))
        .collect();
    Ok(ScoreSet::new(set.system.clone(), entries))
}

/// One grid cell of the tuning surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionCell {
    pub alpha: f64,
    pub beta: f64,
    pub eer: f64,
    pub min_dcf: f64,
}

/// The full (alpha, beta) metric surface from [`tune_fusion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSurface {
    pub grid_step: f64,
    pub cells: Vec<FusionCell>,
}

fn grid_values(step: f64) -> Vec<f64> {
    let mut values = Vec::new();
    let mut i = 0u32;
    loop {
        let v = f64::from(i) * step;
        if v >= 1.0 {
            break;
        }
        values.push(v);
        i += 1;
    }
    values.push(1.0);
    values
}

/// Exhaustive grid search for the fusion weights minimizing validation
/// EER; ties prefer lower minimum DCF, then the lexicographically lower
/// (alpha, beta) cell.
///
/// Returns the winning weights and the full metric surface.
pub fn tune_fusion(
    s1: &ScoreSet,
    s2: &ScoreSet,
    s3: &ScoreSet,
    params: &DcfParams,
    grid_step: f64,
) -> Result<(FusionWeights, FusionSurface), EvalError> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(EvalError::BadParams(format!(
            "grid step must lie in (0, 1], got {grid_step}"
        )));
    }
    params.validate()?;
    s1.validate()?;
    s1.check_aligned(s2)?;
    s1.check_aligned(s3)?;

    let labels: Vec<bool> = s1
        .entries
        .iter()
        .enumerate()
        .map(|(index, (Trial { enroll, test, label }, _))| {
            label.ok_or_else(|| EvalError::Unlabeled {
                index,
                enroll: enroll.clone(),
                test: test.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    let v1: Vec<f64> = s1.entries.iter().map(|(_, s)| *s).collect();
    let v2: Vec<f64> = s2.entries.iter().map(|(_, s)| *s).collect();
    let v3: Vec<f64> = s3.entries.iter().map(|(_, s)| *s).collect();

    let values = grid_values(grid_step);
    let cells_in: Vec<(f64, f64)> = values
        .iter()
        .flat_map(|&a| values.iter().map(move |&b| (a, b)))
        .collect();

    // Cells are independent; evaluate in parallel but keep grid order so
    // the argmin scan below is deterministic.
    let cells: Vec<FusionCell> = cells_in
        .par_iter()
        .map(|&(alpha, beta)| {
            let mut targets = Vec::new();
            let mut nontargets = Vec::new();
            for i in 0..labels.len() {
                let fused = (v1[i] * alpha + v2[i] * (1.0 - alpha)) * beta + v3[i] * (1.0 - beta);
                if labels[i] {
                    targets.push(fused);
                } else {
                    nontargets.push(fused);
                }
            }
            let (eer, _) = eer_from_scores(&targets, &nontargets)?;
            let (min_dcf, _) = min_dcf_from_scores(&targets, &nontargets, params)?;
            Ok(FusionCell {
                alpha,
                beta,
                eer,
                min_dcf,
            })
        })
        .collect::<Result<_, EvalError>>()?;

    let best = cells
        .iter()
        .min_by(|x, y| {
            x.eer
                .total_cmp(&y.eer)
                .then(x.min_dcf.total_cmp(&y.min_dcf))
                .then(x.alpha.total_cmp(&y.alpha))
                .then(x.beta.total_cmp(&y.beta))
        })
        .expect("grid is never empty");
    Ok((
        FusionWeights {
            alpha: best.alpha,
            beta: best.beta,
        },
        FusionSurface {
            grid_step,
            cells,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn set_of(name: &str, scores: &[f64], labels: Option<&[bool]>) -> ScoreSet {
        let entries = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let trial = match labels {
                    Some(l) => Trial::labeled(format!("e{i}"), format!("t{i}"), l[i]),
                    None => Trial::unlabeled(format!("e{i}"), format!("t{i}")),
                };
                (trial, s)
            })
            .collect();
        ScoreSet::new(name, entries)
    }

    #[test]
    fn hand_value_at_the_reference_weights() {
        let s1 = set_of("s1", &[0.2], None);
        let s2 = set_of("s2", &[0.6], None);
        let s3 = set_of("s3", &[0.4], None);
        let fused = fuse_scores(&s1, &s2, &s3, &FusionWeights::default()).unwrap();
        // (0.2*0.30 + 0.6*0.70) * 0.79 + 0.4*0.21 = 0.4632
        assert!((fused.entries[0].1 - 0.4632).abs() < 1e-12);
    }

    #[test]
    fn weight_collapse_selects_single_systems() {
        let s1 = set_of("s1", &[0.9, 0.1], None);
        let s2 = set_of("s2", &[0.5, 0.5], None);
        let s3 = set_of("s3", &[0.2, 0.8], None);

        let only_s1 = fuse_scores(&s1, &s2, &s3, &FusionWeights { alpha: 1.0, beta: 1.0 }).unwrap();
        assert_eq!(only_s1.entries[0].1, 0.9);
        assert_eq!(only_s1.entries[1].1, 0.1);

        // beta = 1 drops s3 entirely.
        let no_s3 = fuse_scores(&s1, &s2, &s3, &FusionWeights { alpha: 0.25, beta: 1.0 }).unwrap();
        assert!((no_s3.entries[0].1 - (0.9 * 0.25 + 0.5 * 0.75)).abs() < 1e-15);
    }

    #[test]
    fn misaligned_trial_lists_name_the_index() {
        let s1 = set_of("s1", &[0.1, 0.2], None);
        let s2 = set_of("s2", &[0.1, 0.2], None);
        let mut s3 = set_of("s3", &[0.1, 0.2], None);
        s3.entries[1].0.test = "elsewhere".into();
        match fuse_scores(&s1, &s2, &s3, &FusionWeights::default()) {
            Err(EvalError::TrialMismatch { index: 1, .. }) => {}
            other => panic!("expected TrialMismatch, got {other:?}"),
        }
    }

    #[test]
    fn min_max_squashes_to_unit_interval() {
        let set = set_of("s", &[-2.0, 0.0, 6.0], None);
        let norm = min_max_normalize(&set).unwrap();
        let scores: Vec<f64> = norm.entries.iter().map(|(_, s)| *s).collect();
        assert_eq!(scores, vec![0.0, 0.25, 1.0]);

        let flat = set_of("s", &[3.0, 3.0], None);
        assert!(matches!(
            min_max_normalize(&flat),
            Err(EvalError::DegenerateScores(_))
        ));
    }

    #[test]
    fn grid_step_001_visits_10201_cells() {
        let labels = [true, false];
        let s1 = set_of("s1", &[0.9, 0.1], Some(&labels));
        let s2 = set_of("s2", &[0.8, 0.2], Some(&labels));
        let s3 = set_of("s3", &[0.7, 0.3], Some(&labels));
        let (_, surface) =
            tune_fusion(&s1, &s2, &s3, &DcfParams::default(), 0.01).unwrap();
        assert_eq!(surface.cells.len(), 101 * 101);
    }

    #[test]
    fn tuner_collapses_to_a_uniquely_perfect_system() {
        // s1 separates perfectly; s2 and s3 are adversarial with huge
        // magnitudes, so any nonzero weight on them inverts some trial
        // pair and only (alpha, beta) = (1, 1) reaches EER 0.
        let labels: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let s1: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let bad: Vec<f64> = labels
            .iter()
            .map(|&l| if l { -1e4 } else { 1e4 })
            .collect();
        let s1 = set_of("s1", &s1, Some(&labels));
        let s2 = set_of("s2", &bad, Some(&labels));
        let s3 = set_of("s3", &bad, Some(&labels));

        let (w, surface) = tune_fusion(&s1, &s2, &s3, &DcfParams::default(), 0.1).unwrap();
        assert_eq!((w.alpha, w.beta), (1.0, 1.0));
        let perfect: Vec<&FusionCell> =
            surface.cells.iter().filter(|c| c.eer == 0.0).collect();
        assert_eq!(perfect.len(), 1, "EER 0 should be unique to (1, 1)");
    }

    #[test]
    fn tuned_eer_matches_a_brute_force_scan() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let labels: Vec<bool> = (0..30).map(|_| rng.gen_bool(0.5)).collect();
        let noisy = |rng: &mut ChaCha20Rng, sep: f64| -> Vec<f64> {
            labels
                .iter()
                .map(|&l| if l { sep } else { -sep } + rng.gen_range(-1.0..1.0))
                .collect()
        };
        let a = noisy(&mut rng, 0.8);
        let b = noisy(&mut rng, 0.5);
        let c = noisy(&mut rng, 0.3);
        let s1 = set_of("s1", &a, Some(&labels));
        let s2 = set_of("s2", &b, Some(&labels));
        let s3 = set_of("s3", &c, Some(&labels));

        let (w, surface) = tune_fusion(&s1, &s2, &s3, &DcfParams::default(), 0.25).unwrap();
        let best_cell = surface
            .cells
            .iter()
            .find(|cell| cell.alpha == w.alpha && cell.beta == w.beta)
            .unwrap();
        // Plain sequential scan over the same surface.
        let brute = surface
            .cells
            .iter()
            .map(|c| c.eer)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best_cell.eer, brute);
    }

    #[test]
    fn unlabeled_validation_trials_are_rejected() {
        let s1 = set_of("s1", &[0.5, 0.4], None);
        assert!(matches!(
            tune_fusion(&s1, &s1.clone(), &s1.clone(), &DcfParams::default(), 0.5),
            Err(EvalError::Unlabeled { index: 0, .. })
        ));
    }

    proptest! {
        #[test]
        fn equal_inputs_pass_through_any_weights(
            score in -5.0f64..5.0,
            alpha in 0.0f64..=1.0,
            beta in 0.0f64..=1.0,
        ) {
            let s = set_of("s", &[score], None);
            let w = FusionWeights { alpha, beta };
            let fused = fuse_scores(&s, &s.clone(), &s.clone(), &w).unwrap();
            prop_assert!(
                (fused.entries[0].1 - score).abs() <= 1e-12 * score.abs().max(1.0),
                "{} became {}", score, fused.entries[0].1
            );
        }

        #[test]
        fn fusion_is_monotone_in_each_system(
            base in -2.0f64..2.0,
            bump in 0.001f64..3.0,
            alpha in 0.01f64..0.99,
            beta in 0.01f64..0.99,
        ) {
            let w = FusionWeights { alpha, beta };
            let hi = set_of("hi", &[base + bump], None);
            let other = set_of("o", &[base], None);
            for which in 0..3 {
                let pick = |i: usize| if i == which { &hi } else { &other };
                let up = fuse_scores(pick(0), pick(1), pick(2), &w).unwrap();
                let down = fuse_scores(&other, &other.clone(), &other.clone(), &w).unwrap();
                prop_assert!(
                    up.entries[0].1 >= down.entries[0].1,
                    "raising system {which} lowered the fused score"
                );
            }
        }
    }
}
