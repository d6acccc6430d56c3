//! Central finite-difference verification of analytic gradients.
//!
//! A [`Fragment`] pins a model together with a fixed input and loss so the
//! whole thing becomes a deterministic scalar function of the parameters.
//! [`grad_check`] then compares the backward pass against
//! `(L(w + eps) - L(w - eps)) / (2 eps)` coordinate by coordinate.

use super::param::{collect_grads, nudge_param, param_layout, Net};
use super::NnError;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// A model plus frozen input and loss, reduced to `loss: params -> f64`.
///
/// Implementations must be deterministic: two calls to [`Fragment::loss`]
/// without parameter changes in between must return the same bits.
pub trait Fragment {
    fn net(&mut self) -> &mut dyn Net;

    /// Scalar loss at the current parameters (forward only).
    fn loss(&mut self) -> Result<f64, NnError>;

    /// Zero gradients, then run one forward/backward pass so that every
    /// parameter's `grad` holds dL/dw.
    fn compute_grads(&mut self) -> Result<(), NnError>;
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub epsilon: f64,
    /// Maximum relative error accepted as a pass.
    pub tolerance: f64,
    /// Floor on the relative-error denominator, guarding the 0-vs-0 case.
    pub denom_floor: f64,
    /// When set, at most this many coordinates are checked per parameter
    /// tensor, drawn without replacement from a seeded RNG. `None` checks
    /// every coordinate.
    pub max_coords_per_tensor: Option<usize>,
    /// Seed for coordinate subsampling; unused when checking all coords.
    pub sample_seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            epsilon: 1e-5,
            tolerance: 1e-3,
            denom_floor: 1e-6,
            max_coords_per_tensor: None,
            sample_seed: 0,
        }
    }
}

/// Result of a gradient check. `worst` names the coordinate with the
/// largest relative error as `(param name, flat index, analytic, numeric)`.
#[derive(Debug, Clone)]
pub struct GradCheckOutcome {
    pub passed: bool,
    pub max_rel_err: f64,
    pub coords_checked: usize,
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Verifies the fragment's backward pass against central finite
/// differences: relative error `|a - n| / max(floor, |a| + |n|)` must stay
/// within `config.tolerance` at every checked coordinate.
pub fn grad_check(fragment: &mut dyn Fragment, config: &GradCheckConfig) -> Result<GradCheckOutcome, NnError> {
    fragment.compute_grads()?;
    let analytic = collect_grads(fragment.net());
    let layout = param_layout(fragment.net());
    let mut rng = ChaCha20Rng::seed_from_u64(config.sample_seed);

    let mut max_rel_err: f64 = 0.0;
    let mut worst = None;
    let mut coords_checked = 0usize;

    for (ti, (name, shape)) in layout.iter().enumerate() {
        let numel: usize = shape.iter().product();
        let coords: Vec<usize> = match config.max_coords_per_tensor {
            Some(k) if k < numel => {
                let mut picks = rand::seq::index::sample(&mut rng, numel, k).into_vec();
                picks.sort_unstable();
                picks
            }
            _ => (0..numel).collect(),
        };
        for coord in coords {
            nudge_param(fragment.net(), ti, coord, config.epsilon);
            let plus = fragment.loss()?;
            nudge_param(fragment.net(), ti, coord, -2.0 * config.epsilon);
            let minus = fragment.loss()?;
            nudge_param(fragment.net(), ti, coord, config.epsilon);

            let numeric = (plus - minus) / (2.0 * config.epsilon);
            let a = analytic[ti].data()[coord];
            let rel = (a - numeric).abs() / config.denom_floor.max(a.abs() + numeric.abs());
            coords_checked += 1;
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = Some((name.clone(), coord, a, numeric));
            }
        }
    }

    Ok(GradCheckOutcome {
        passed: max_rel_err < config.tolerance,
        max_rel_err,
        coords_checked,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{bce_grad_wrt_logit, bce_loss, sigmoid_scalar, Linear, Param, Tensor};

    /// logistic regression on one fixed sample: loss = BCE(sigmoid(Wx+b), y)
    struct Logistic {
        lin: Linear,
        x: Tensor,
        y: f64,
        /// scales the analytic gradient, to test failure detection
        sabotage: f64,
    }

    impl Logistic {
        fn new(sabotage: f64) -> Self {
            let mut rng = ChaCha20Rng::seed_from_u64(7);
            Logistic {
                lin: Linear::new(5, 1, &mut rng),
                x: Tensor::vector(&[0.3, -1.2, 0.8, 0.05, 2.0]),
                y: 1.0,
                sabotage,
            }
        }
    }

    impl crate::nncore::Net for Logistic {
        fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
            f("lin.weight", &self.lin.weight);
            f("lin.bias", &self.lin.bias);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
            f("lin.weight", &mut self.lin.weight);
            f("lin.bias", &mut self.lin.bias);
        }
    }

    impl Fragment for Logistic {
        fn net(&mut self) -> &mut dyn crate::nncore::Net {
            self
        }
        fn loss(&mut self) -> Result<f64, NnError> {
            let z = self.lin.forward(&self.x)?;
            Ok(bce_loss(sigmoid_scalar(z.data()[0]), self.y))
        }
        fn compute_grads(&mut self) -> Result<(), NnError> {
            self.lin.weight.zero_grad();
            self.lin.bias.zero_grad();
            let z = self.lin.forward(&self.x)?;
            let p = sigmoid_scalar(z.data()[0]);
            let gz = self.sabotage * bce_grad_wrt_logit(p, self.y);
            self.lin.backward(&self.x, &Tensor::vector(&[gz]))?;
            Ok(())
        }
    }

    #[test]
    fn correct_gradient_passes() {
        let mut frag = Logistic::new(1.0);
        let out = grad_check(&mut frag, &GradCheckConfig::default()).unwrap();
        assert!(out.passed, "max rel err {}", out.max_rel_err);
        assert_eq!(out.coords_checked, 6);
    }

    #[test]
    fn sabotaged_gradient_fails_and_is_localized() {
        let mut frag = Logistic::new(2.0);
        let out = grad_check(&mut frag, &GradCheckConfig::default()).unwrap();
        assert!(!out.passed);
        let (name, _, a, n) = out.worst.unwrap();
        assert!(name.starts_with("lin."));
        // doubled analytic gradient: rel err ~ |2n - n| / |3n| = 1/3
        assert!((out.max_rel_err - 1.0 / 3.0).abs() < 1e-3, "{a} vs {n}");
    }

    /// conv -> relu -> maxpool -> self-attention pool -> linear -> BCE;
    /// one composed check covering every backward pass in the crate.
    struct MiniConvNet {
        conv: crate::nncore::Conv2d,
        sap: crate::nncore::SapPool,
        lin: Linear,
        x: Tensor,
    }

    impl MiniConvNet {
        fn new() -> Self {
            let mut rng = ChaCha20Rng::seed_from_u64(11);
            let x = crate::nncore::uniform_symmetric(&[1, 4, 6], 1.0, &mut rng);
            MiniConvNet {
                conv: crate::nncore::Conv2d::new(1, 2, 3, 3, 1, &mut rng),
                sap: crate::nncore::SapPool::new(4, 3, &mut rng),
                lin: Linear::new(4, 1, &mut rng),
                x,
            }
        }

        fn run(&mut self, backward: bool) -> Result<f64, NnError> {
            use crate::nncore::{maxpool2d, maxpool2d_backward, relu, relu_backward};
            let a = self.conv.forward(&self.x)?; // [2,4,6]
            let r = relu(&a);
            let (p, argmax) = maxpool2d(&r)?; // [2,2,3]
            let frames = p.clone().reshape(&[4, 3])?; // channel*row features, 3 frames
            let (pooled, cache) = self.sap.forward_cached(&frames)?;
            let z = self.lin.forward(&pooled)?;
            let prob = sigmoid_scalar(z.data()[0]);
            let loss = bce_loss(prob, 1.0);
            if backward {
                let gz = Tensor::vector(&[bce_grad_wrt_logit(prob, 1.0)]);
                let g_pooled = self.lin.backward(&pooled, &gz)?;
                let g_frames = self.sap.backward(&frames, &cache, &g_pooled)?;
                let gp = g_frames.reshape(&[2, 2, 3])?;
                let gr = maxpool2d_backward(&[2, 4, 6], &argmax, &gp);
                let ga = relu_backward(&a, &gr);
                self.conv.backward(&self.x, &ga)?;
            }
            Ok(loss)
        }
    }

    impl crate::nncore::Net for MiniConvNet {
        fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
            f("conv.weight", &self.conv.weight);
            f("conv.bias", &self.conv.bias);
            f("sap.w", &self.sap.w);
            f("sap.b", &self.sap.b);
            f("sap.v", &self.sap.v);
            f("lin.weight", &self.lin.weight);
            f("lin.bias", &self.lin.bias);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
            f("conv.weight", &mut self.conv.weight);
            f("conv.bias", &mut self.conv.bias);
            f("sap.w", &mut self.sap.w);
            f("sap.b", &mut self.sap.b);
            f("sap.v", &mut self.sap.v);
            f("lin.weight", &mut self.lin.weight);
            f("lin.bias", &mut self.lin.bias);
        }
    }

    impl Fragment for MiniConvNet {
        fn net(&mut self) -> &mut dyn crate::nncore::Net {
            self
        }
        fn loss(&mut self) -> Result<f64, NnError> {
            self.run(false)
        }
        fn compute_grads(&mut self) -> Result<(), NnError> {
            self.net().zero_grads();
            self.run(true)?;
            Ok(())
        }
    }

    #[test]
    fn composed_conv_sap_linear_gradient_is_correct() {
        let mut frag = MiniConvNet::new();
        let out = grad_check(&mut frag, &GradCheckConfig::default()).unwrap();
        assert!(
            out.passed,
            "max rel err {} at {:?}",
            out.max_rel_err, out.worst
        );
    }

    #[test]
    fn coordinate_subsampling_bounds_the_work() {
        let mut frag = Logistic::new(1.0);
        let cfg = GradCheckConfig {
            max_coords_per_tensor: Some(2),
            ..GradCheckConfig::default()
        };
        let out = grad_check(&mut frag, &cfg).unwrap();
        assert!(out.passed);
        // 2 of 5 weight coords + the full 1-element bias
        assert_eq!(out.coords_checked, 3);
    }
}
