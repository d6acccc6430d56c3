//! Trial, score-set, and metric parameter types.

use super::EvalError;
use serde::{Deserialize, Serialize};

/// One verification question: do `enroll` and `test` share a speaker?
/// `label` is `Some(true)` for target (same-speaker) trials, `Some(false)`
/// for nontarget trials, and `None` when ground truth is withheld.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub enroll: String,
    pub test: String,
    pub label: Option<bool>,
}

impl Trial {
    pub fn labeled(enroll: impl Into<String>, test: impl Into<String>, target: bool) -> Self {
        Trial {
            enroll: enroll.into(),
            test: test.into(),
            label: Some(target),
        }
    }

    pub fn unlabeled(enroll: impl Into<String>, test: impl Into<String>) -> Self {
        Trial {
            enroll: enroll.into(),
            test: test.into(),
            label: None,
        }
    }
}

/// One system's scores over an ordered trial list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub system: String,
    pub entries: Vec<(Trial, f64)>,
}

impl ScoreSet {
    pub fn new(system: impl Into<String>, entries: Vec<(Trial, f64)>) -> Self {
        ScoreSet {
            system: system.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.entries.is_empty() {
            return Err(EvalError::EmptyInput(format!(
                "score set '{}' is empty",
                self.system
            )));
        }
        for (trial, score) in &self.entries {
            if !score.is_finite() {
                return Err(EvalError::NonFinite(format!(
                    "({}, {}) scored {score}",
                    trial.enroll, trial.test
                )));
            }
        }
        Ok(())
    }

    /// Splits scores into (targets, nontargets); every trial must be
    /// labeled.
    pub fn partition(&self) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let mut targets = Vec::new();
        let mut nontargets = Vec::new();
        for (index, (trial, score)) in self.entries.iter().enumerate() {
            match trial.label {
                Some(true) => targets.push(*score),
                Some(false) => nontargets.push(*score),
                None => {
                    return Err(EvalError::Unlabeled {
                        index,
                        enroll: trial.enroll.clone(),
                        test: trial.test.clone(),
                    })
                }
            }
        }
        Ok((targets, nontargets))
    }

    /// Errors with the first differing index unless `other` covers the
    /// same trials in the same order (ids and labels).
    pub fn check_aligned(&self, other: &ScoreSet) -> Result<(), EvalError> {
        if self.len() != other.len() {
            return Err(EvalError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        for (index, ((a, _), (b, _))) in self.entries.iter().zip(&other.entries).enumerate() {
            if a != b {
                return Err(EvalError::TrialMismatch {
                    index,
                    left: format!("{} {} {:?}", a.enroll, a.test, a.label),
                    right: format!("{} {} {:?}", b.enroll, b.test, b.label),
                });
            }
        }
        Ok(())
    }
}

/// Affine fusion weights: `((s1*alpha + s2*(1-alpha)) * beta) + s3*(1-beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FusionWeights {
    /// The reference operating point from validation tuning.
    fn default() -> Self {
        FusionWeights {
            alpha: 0.30,
            beta: 0.79,
        }
    }
}

impl FusionWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, EvalError> {
        let w = FusionWeights { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(EvalError::BadWeights(format!("{name} = {v}, need [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Detection cost parameters: miss/false-alarm costs and target prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcfParams {
    pub c_miss: f64,
    pub c_fa: f64,
    pub p_target: f64,
}

impl Default for DcfParams {
    fn default() -> Self {
        DcfParams {
            c_miss: 1.0,
            c_fa: 1.0,
            p_target: 0.05,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.c_miss > 0.0 && self.c_fa > 0.0) {
            return Err(EvalError::BadParams(format!(
                "costs must be positive, got c_miss {} c_fa {}",
                self.c_miss, self.c_fa
            )));
        }
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(EvalError::BadParams(format!(
                "p_target must lie in (0, 1), got {}",
                self.p_target
            )));
        }
        Ok(())
    }

    /// Cost of the better trivial system (accept-all or reject-all); the
    /// normalizer that makes DCF values comparable across parameters.
    pub fn normalizer(&self) -> f64 {
        (self.c_miss * self.p_target).min(self.c_fa * (1.0 - self.p_target))
    }
}

/// The JSON metrics artifact for one evaluated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub eer: f64,
    pub eer_threshold: f64,
    pub min_dcf: f64,
    pub dcf_threshold: f64,
    pub params: DcfParams,
}
