//! Training objectives: MSE for the autoencoder, binary cross-entropy for
//! the double-branch verifier, and a squared-distance triplet hinge for the
//! triple-branch model.

use super::tensor::{dot, Tensor};
use super::NnError;

/// Probability clamp for binary cross-entropy; keeps `ln` finite when a
/// sigmoid saturates.
pub const BCE_EPS: f64 = 1e-7;

/// Mean squared error over all elements: `mean((pred - target)^2)`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64, NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::Shape(format!(
            "mse_loss shape mismatch: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.numel() as f64;
    let mut acc = 0.0;
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        acc += d * d;
    }
    Ok(acc / n)
}

/// Gradient of [`mse_loss`] with respect to `pred`: `2 (pred - target) / n`.
pub fn mse_grad(pred: &Tensor, target: &Tensor) -> Result<Tensor, NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::Shape(format!(
            "mse_grad shape mismatch: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.numel() as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| 2.0 * (p - t) / n)
        .collect();
    Tensor::from_vec(pred.shape(), data)
}

/// Binary cross-entropy for a single probability, with `p` clamped to
/// `[BCE_EPS, 1 - BCE_EPS]` so labels mismatched against a saturated
/// sigmoid produce a large-but-finite loss.
pub fn bce_loss(p: f64, label: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Gradient of [`bce_loss`] with respect to the probability `p`.
///
/// Zero outside the clamp interval, matching the flat loss there; inside,
/// the usual `(p - y) / (p (1 - p))`.
pub fn bce_grad_wrt_p(p: f64, label: f64) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
        return 0.0;
    }
    (p - label) / (p * (1.0 - p))
}

/// Gradient of `bce_loss(sigmoid(z), label)` with respect to the logit `z`.
///
/// The fused form `p - y` stays stable even when the sigmoid saturates,
/// so training uses this rather than chaining through [`bce_grad_wrt_p`].
pub fn bce_grad_wrt_logit(p: f64, label: f64) -> f64 {
    p - label
}

/// Squared-distance triplet hinge on (anchor, client, impostor) embeddings:
/// `max(0, ||a - c||^2 - ||a - i||^2 + margin)`.
pub fn triplet_loss(anchor: &[f64], client: &[f64], impostor: &[f64], margin: f64) -> Result<f64, NnError> {
    check_triplet_dims(anchor, client, impostor)?;
    let d_ac = sq_dist(anchor, client);
    let d_ai = sq_dist(anchor, impostor);
    Ok((d_ac - d_ai + margin).max(0.0))
}

/// Gradients of [`triplet_loss`] with respect to all three embeddings.
///
/// Returns `(loss, grad_anchor, grad_client, grad_impostor)`; the grads are
/// zero vectors when the hinge is inactive.
#[allow(clippy::type_complexity)]
pub fn triplet_grads(
    anchor: &[f64],
    client: &[f64],
    impostor: &[f64],
    margin: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>), NnError> {
    check_triplet_dims(anchor, client, impostor)?;
    let d_ac = sq_dist(anchor, client);
    let d_ai = sq_dist(anchor, impostor);
    let loss = (d_ac - d_ai + margin).max(0.0);
    let n = anchor.len();
    if loss == 0.0 {
        return Ok((0.0, vec![0.0; n], vec![0.0; n], vec![0.0; n]));
    }
    let mut ga = vec![0.0; n];
    let mut gc = vec![0.0; n];
    let mut gi = vec![0.0; n];
    for k in 0..n {
        // d/da (||a-c||^2 - ||a-i||^2) = 2(a-c) - 2(a-i) = 2(i - c)
        ga[k] = 2.0 * (impostor[k] - client[k]);
        gc[k] = -2.0 * (anchor[k] - client[k]);
        gi[k] = 2.0 * (anchor[k] - impostor[k]);
    }
    Ok((loss, ga, gc, gi))
}

fn check_triplet_dims(a: &[f64], c: &[f64], i: &[f64]) -> Result<(), NnError> {
    if a.len() != c.len() || a.len() != i.len() {
        return Err(NnError::Shape(format!(
            "triplet embeddings disagree in length: {} / {} / {}",
            a.len(),
            c.len(),
            i.len()
        )));
    }
    if a.is_empty() {
        return Err(NnError::EmptyInput("triplet over empty embeddings".into()));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    dot(&diff, &diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_hand_values() {
        let p = Tensor::vector(&[1.0, 2.0]);
        let t = Tensor::vector(&[0.0, 0.0]);
        assert_eq!(mse_loss(&p, &t).unwrap(), 2.5);
        let zero = mse_loss(&p, &p).unwrap();
        assert_eq!(zero, 0.0);
        let g = mse_grad(&p, &t).unwrap();
        assert_eq!(g.data(), &[1.0, 2.0]);
    }

    #[test]
    fn bce_is_clamped_at_extremes() {
        // -ln(1e-7), the worst case the clamp allows
        let worst = bce_loss(0.0, 1.0);
        assert!((worst - 16.118_095_650_958_32).abs() < 1e-12);
        assert!(bce_loss(1.0, 1.0) < 1e-6);
        assert!((bce_loss(0.5, 1.0) - 0.5f64.ln().abs()).abs() < 1e-12);
    }

    #[test]
    fn bce_grads_agree_inside_clamp() {
        let (p, y) = (0.7, 1.0);
        // chain rule through sigmoid: dL/dz = dL/dp * p(1-p)
        let via_p = bce_grad_wrt_p(p, y) * p * (1.0 - p);
        assert!((via_p - bce_grad_wrt_logit(p, y)).abs() < 1e-12);
        assert_eq!(bce_grad_wrt_p(1e-9, 0.0), 0.0);
    }

    #[test]
    fn triplet_hand_value_and_inactive_hinge() {
        let a = [1.0, 0.0];
        let c = [0.0, 1.0];
        let i = [1.0, 0.0];
        // ||a-c||^2 = 2, ||a-i||^2 = 0 -> 2 + 0.2
        let l = triplet_loss(&a, &c, &i, 0.2).unwrap();
        assert!((l - 2.2).abs() < 1e-12);

        // client at the anchor, impostor far away: hinge off, grads zero
        let (l, ga, gc, gi) = triplet_grads(&a, &a, &c, 0.2).unwrap();
        assert_eq!(l, 0.0);
        assert!(ga.iter().chain(&gc).chain(&gi).all(|&g| g == 0.0));
    }

    #[test]
    fn triplet_grads_match_hand_derivation() {
        let a = [1.0, 0.0];
        let c = [0.0, 1.0];
        let i = [-1.0, 0.0];
        let (l, ga, gc, gi) = triplet_grads(&a, &c, &i, 0.2).unwrap();
        // d_ac = 2, d_ai = 4 -> hinge active only because margin pushes it over? 2-4+0.2 < 0
        assert_eq!(l, 0.0);
        let _ = (ga, gc, gi);

        // swap roles so the hinge actually fires
        let (l, ga, gc, gi) = triplet_grads(&a, &i, &c, 0.2).unwrap();
        assert!((l - (4.0 - 2.0 + 0.2)).abs() < 1e-12);
        assert_eq!(ga, vec![2.0 * (c[0] - i[0]), 2.0 * (c[1] - i[1])]);
        assert_eq!(gc, vec![-2.0 * (a[0] - i[0]), -2.0 * (a[1] - i[1])]);
        assert_eq!(gi, vec![2.0 * (a[0] - c[0]), 2.0 * (a[1] - c[1])]);
    }

    #[test]
    fn triplet_rejects_mismatched_lengths() {
        assert!(triplet_loss(&[1.0], &[1.0, 2.0], &[1.0], 0.2).is_err());
        assert!(triplet_loss(&[], &[], &[], 0.2).is_err());
    }
}
