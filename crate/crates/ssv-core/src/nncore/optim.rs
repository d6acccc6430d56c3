//! Plain SGD with inverse-time learning-rate decay, and Adam.
//!
//! Both operate on whatever a [`Net`](super::Net) exposes through
//! `visit_params_mut`, so models never need optimizer-specific code.

use super::param::{AdamState, Net};
use super::{NnError, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Learning-rate schedule applied on top of the base rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    /// Constant learning rate.
    None,
    /// `lr_t = lr_0 / (1 + decay * t)` with `t` counting completed steps,
    /// so the very first update uses the base rate unchanged.
    InverseTime { decay: f64 },
}

impl DecayKind {
    pub fn rate_at(&self, base_lr: f64, step: usize) -> f64 {
        match *self {
            DecayKind::None => base_lr,
            DecayKind::InverseTime { decay } => base_lr / (1.0 + decay * step as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub decay: DecayKind,
    /// L2 coupling added to every gradient as `g + weight_decay * p`.
    ///
    /// Off by default; exists as the alternative reading of a decay
    /// hyperparameter for callers who mean parameter shrinkage rather
    /// than a learning-rate schedule.
    pub weight_decay: f64,
    /// Adam first-moment coefficient; unused by SGD.
    pub beta1: f64,
    /// Adam second-moment coefficient; unused by SGD.
    pub beta2: f64,
    /// Adam denominator epsilon; unused by SGD.
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64, decay: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr,
            decay: if decay == 0.0 {
                DecayKind::None
            } else {
                DecayKind::InverseTime { decay }
            },
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            decay: DecayKind::None,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Applies one update to every parameter of `net` from its accumulated
/// gradients. `step` is the number of updates already taken (0 for the
/// first call); it drives both the decay schedule and Adam's bias
/// correction. Gradients are left untouched - callers zero them for the
/// next batch.
pub fn optimizer_step(net: &mut dyn Net, config: &OptimizerConfig, step: usize) -> Result<(), NnError> {
    let lr = config.decay.rate_at(config.lr, step);
    let wd = config.weight_decay;
    let couple = |p: &super::param::Param| -> Vec<f64> {
        p.grad
            .data()
            .iter()
            .zip(p.value.data())
            .map(|(g, v)| g + wd * v)
            .collect()
    };
    match config.kind {
        OptimizerKind::Sgd => {
            net.visit_params_mut(&mut |_, p| {
                let g = couple(p);
                let v = p.value.data_mut();
                for (vi, gi) in v.iter_mut().zip(&g) {
                    *vi -= lr * gi;
                }
            });
        }
        OptimizerKind::Adam => {
            let (b1, b2, eps) = (config.beta1, config.beta2, config.eps);
            let t = (step + 1) as i32;
            let bc1 = 1.0 - b1.powi(t);
            let bc2 = 1.0 - b2.powi(t);
            net.visit_params_mut(&mut |_, p| {
                if p.state.is_none() {
                    p.state = Some(AdamState {
                        m: Tensor::zeros(p.value.shape()),
                        v: Tensor::zeros(p.value.shape()),
                    });
                }
                let g = couple(p);
                let state = p.state.as_mut().expect("just initialized");
                let md = state.m.data_mut();
                for (mi, gi) in md.iter_mut().zip(&g) {
                    *mi = b1 * *mi + (1.0 - b1) * gi;
                }
                let vd = state.v.data_mut();
                for (vi, gi) in vd.iter_mut().zip(&g) {
                    *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                }
                let m = state.m.data().to_vec();
                let v = state.v.data().to_vec();
                let val = p.value.data_mut();
                for i in 0..val.len() {
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    val[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            });
        }
    }
    super::param::ensure_finite_params(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::param::Param;

    /// One scalar weight, enough to exercise the update arithmetic.
    struct Scalar {
        w: Param,
    }

    impl Scalar {
        fn new(value: f64) -> Self {
            Scalar {
                w: Param::new(Tensor::vector(&[value])),
            }
        }
    }

    impl Net for Scalar {
        fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
            f("w", &self.w);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
            f("w", &mut self.w);
        }
    }

    #[test]
    fn sgd_hand_step() {
        let mut net = Scalar::new(1.0);
        net.w.grad = Tensor::vector(&[0.5]);
        let cfg = OptimizerConfig::sgd(0.01, 0.0);
        optimizer_step(&mut net, &cfg, 0).unwrap();
        assert!((net.w.value.data()[0] - 0.995).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_shrinks_even_with_zero_gradient() {
        let mut net = Scalar::new(1.0);
        let mut cfg = OptimizerConfig::sgd(0.01, 0.0);
        cfg.weight_decay = 0.0002;
        optimizer_step(&mut net, &cfg, 0).unwrap();
        // p <- p - lr * (0 + wd * p) = 1 - 0.01 * 0.0002
        assert!((net.w.value.data()[0] - (1.0 - 0.01 * 0.0002)).abs() < 1e-15);
    }

    #[test]
    fn inverse_time_decay_matches_formula() {
        let cfg = OptimizerConfig::sgd(0.01, 0.0002);
        assert_eq!(cfg.decay.rate_at(cfg.lr, 0), 0.01);
        let at_100 = cfg.decay.rate_at(cfg.lr, 100);
        assert!((at_100 - 0.01 / 1.02).abs() < 1e-15);
        assert!(at_100 < 0.01);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // With bias correction, the first Adam step is ~lr * sign(g)
        // regardless of gradient magnitude (for eps << |g|).
        let mut net = Scalar::new(0.0);
        net.w.grad = Tensor::vector(&[3.7]);
        let cfg = OptimizerConfig::adam(1e-4);
        optimizer_step(&mut net, &cfg, 0).unwrap();
        let w = net.w.value.data()[0];
        assert!((w + 1e-4).abs() < 1e-8, "got {w}");
    }

    #[test]
    fn adam_state_persists_across_steps() {
        let mut net = Scalar::new(0.0);
        let cfg = OptimizerConfig::adam(1e-4);
        net.w.grad = Tensor::vector(&[1.0]);
        optimizer_step(&mut net, &cfg, 0).unwrap();
        let m_after_first = net.w.state.as_ref().unwrap().m.data()[0];
        assert!((m_after_first - 0.1).abs() < 1e-12);
        optimizer_step(&mut net, &cfg, 1).unwrap();
        let m_after_second = net.w.state.as_ref().unwrap().m.data()[0];
        assert!((m_after_second - 0.19).abs() < 1e-12);
    }

    #[test]
    fn non_finite_update_is_reported() {
        let mut net = Scalar::new(1.0);
        net.w.grad = Tensor::vector(&[f64::NAN]);
        let cfg = OptimizerConfig::sgd(0.01, 0.0);
        assert!(matches!(
            optimizer_step(&mut net, &cfg, 0),
            Err(NnError::NonFinite { .. })
        ));
    }
}
