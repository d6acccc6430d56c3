//! Equal error rate and minimum detection cost.
//!
//! Both metrics sweep thresholds with the convention "accept when
//! score >= threshold". The achievable operating points of such a
//! detector are finite: one per distinct score, plus the reject-all
//! point. The EER is where the false-accept and false-reject curves
//! cross; when they cross between two adjacent operating points the ROC
//! segment is interpolated linearly. The DCF minimum is searched over
//! thresholds placed *between* consecutive distinct scores (plus the two
//! trivial endpoints), where the accept rule is unambiguous.

use super::types::{DcfParams, ScoreSet};
use super::EvalError;

fn check_classes(targets: &[f64], nontargets: &[f64]) -> Result<(), EvalError> {
    if targets.is_empty() || nontargets.is_empty() {
        return Err(EvalError::SingleClass {
            targets: targets.len(),
            nontargets: nontargets.len(),
        });
    }
    for s in targets.iter().chain(nontargets) {
        if !s.is_finite() {
            return Err(EvalError::NonFinite(format!("score {s}")));
        }
    }
    Ok(())
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Distinct scores, ascending.
fn distinct_thresholds(targets: &[f64], nontargets: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(targets.len() + nontargets.len());
    v.extend_from_slice(targets);
    v.extend_from_slice(nontargets);
    v.sort_unstable_by(f64::total_cmp);
    v.dedup();
    v
}

/// Fraction of `sorted_scores` that are >= `threshold`.
fn frac_at_or_above(sorted_scores: &[f64], threshold: f64) -> f64 {
    let below = sorted_scores.partition_point(|s| *s < threshold);
    (sorted_scores.len() - below) as f64 / sorted_scores.len() as f64
}

/// Fraction of `sorted_scores` strictly below `threshold`.
fn frac_below(sorted_scores: &[f64], threshold: f64) -> f64 {
    sorted_scores.partition_point(|s| *s < threshold) as f64 / sorted_scores.len() as f64
}

/// Equal error rate over raw target/nontarget scores.
///
/// Returns `(eer, threshold)`. At an exact crossing the threshold is one
/// of the scores; otherwise both the rate and the threshold are linear
/// interpolations within the bracketing ROC segment.
pub fn eer_from_scores(targets: &[f64], nontargets: &[f64]) -> Result<(f64, f64), EvalError> {
    check_classes(targets, nontargets)?;
    let tar = sorted(targets);
    let non = sorted(nontargets);

    // Operating points at every distinct score, then the reject-all end.
    let mut points: Vec<(f64, f64, f64)> = distinct_thresholds(targets, nontargets)
        .into_iter()
        .map(|th| (th, frac_at_or_above(&non, th), frac_below(&tar, th)))
        .collect();
    let top = points.last().expect("both classes nonempty").0;
    points.push((top + 1.0, 0.0, 1.0));

    // far - frr starts at 1 (accept everything) and ends at -1; it is
    // non-increasing, so the first sign change brackets the crossing.
    let mut prev = points[0];
    for &(th, far, frr) in &points {
        let diff = far - frr;
        if diff == 0.0 {
            // The averaged form keeps negate-and-swap symmetry exact.
            return Ok(((far + frr) / 2.0, th));
        }
        if diff < 0.0 {
            let (th0, far0, frr0) = prev;
            let d0 = far0 - frr0;
            let t = d0 / (d0 - diff);
            let far_x = far0 + t * (far - far0);
            let frr_x = frr0 + t * (frr - frr0);
            return Ok(((far_x + frr_x) / 2.0, th0 + t * (th - th0)));
        }
        prev = (th, far, frr);
    }
    unreachable!("the reject-all point has far - frr = -1");
}

/// Normalized detection cost at one fixed threshold.
pub fn dcf_at_threshold(
    targets: &[f64],
    nontargets: &[f64],
    params: &DcfParams,
    threshold: f64,
) -> Result<f64, EvalError> {
    check_classes(targets, nontargets)?;
    params.validate()?;
    let p_miss = frac_below(&sorted(targets), threshold);
    let p_fa = frac_at_or_above(&sorted(nontargets), threshold);
    let cost = params.c_miss * params.p_target * p_miss
        + params.c_fa * (1.0 - params.p_target) * p_fa;
    Ok(cost / params.normalizer())
}

/// Minimum normalized detection cost over all thresholds.
///
/// Candidates sit between consecutive distinct scores, plus one below
/// the minimum (accept everything) and one above the maximum (reject
/// everything), so the result never exceeds the trivial-system cost of 1.
/// Ties keep the lowest threshold.
pub fn min_dcf_from_scores(
    targets: &[f64],
    nontargets: &[f64],
    params: &DcfParams,
) -> Result<(f64, f64), EvalError> {
    check_classes(targets, nontargets)?;
    params.validate()?;
    let tar = sorted(targets);
    let non = sorted(nontargets);
    let distinct = distinct_thresholds(targets, nontargets);

    let mut candidates = Vec::with_capacity(distinct.len() + 1);
    candidates.push(distinct[0] - 1.0);
    candidates.extend(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(distinct[distinct.len() - 1] + 1.0);

    let norm = params.normalizer();
    let mut best = (f64::INFINITY, f64::NAN);
    for th in candidates {
        let cost = params.c_miss * params.p_target * frac_below(&tar, th)
            + params.c_fa * (1.0 - params.p_target) * frac_at_or_above(&non, th);
        let dcf = cost / norm;
        if dcf < best.0 {
            best = (dcf, th);
        }
    }
    Ok(best)
}

/// EER of a labeled score set; `(eer, threshold)`.
pub fn compute_eer(set: &ScoreSet) -> Result<(f64, f64), EvalError> {
    set.validate()?;
    let (targets, nontargets) = set.partition()?;
    eer_from_scores(&targets, &nontargets)
}

/// Minimum DCF of a labeled score set; `(min_dcf, threshold)`.
pub fn compute_min_dcf(set: &ScoreSet, params: &DcfParams) -> Result<(f64, f64), EvalError> {
    set.validate()?;
    let (targets, nontargets) = set.partition()?;
    min_dcf_from_scores(&targets, &nontargets, params)
}
