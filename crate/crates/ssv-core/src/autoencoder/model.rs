//! The autoencoder network: fully connected, ReLU throughout except a
//! linear output layer, symmetric around the bottleneck.

use super::AeError;
use crate::nncore::{mse_grad, relu, relu_backward, Linear, Net, NnError, Param, Tensor};
use rand::Rng;

/// Layer sizes `[dim, hidden..., dim]`; the reference configuration is
/// `[400, 300, 200, 300, 400]` with the 200-d bottleneck in the middle.
#[derive(Debug, Clone)]
pub struct AEModel {
    layers: Vec<Linear>,
    sizes: Vec<usize>,
}

impl AEModel {
    /// Builds an untrained model. `hidden` must read the same forwards and
    /// backwards (encoder and decoder mirror each other).
    pub fn new(dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Result<Self, AeError> {
        if dim == 0 || hidden.is_empty() {
            return Err(AeError::BadConfig(
                "autoencoder needs dim >= 1 and at least one hidden layer".into(),
            ));
        }
        if hidden.contains(&0) {
            return Err(AeError::BadConfig("hidden layer of size 0".into()));
        }
        let mirrored: Vec<usize> = hidden.iter().rev().copied().collect();
        if hidden != mirrored {
            return Err(AeError::BadConfig(format!(
                "hidden sizes {hidden:?} are not symmetric around the bottleneck"
            )));
        }
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(dim);
        sizes.extend_from_slice(hidden);
        sizes.push(dim);
        let layers = sizes
            .windows(2)
            .map(|w| Linear::new(w[0], w[1], rng))
            .collect();
        Ok(AEModel { layers, sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn bottleneck(&self) -> usize {
        self.sizes[self.sizes.len() / 2]
    }

    /// Full reconstruction pass for a `[dim]` vector or `[b, dim]` batch.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h)?;
            h = if i == last { z } else { relu(&z) };
        }
        Ok(h)
    }

    /// Forward pass retaining per-layer inputs and pre-activations for
    /// [`AEModel::backward`]. Returns `(layer_inputs, pre_activations,
    /// output)` where `layer_inputs[i]` fed layer `i`.
    pub(crate) fn forward_cached(
        &self,
        x: &Tensor,
    ) -> Result<(Vec<Tensor>, Vec<Tensor>, Tensor), NnError> {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h)?;
            inputs.push(h);
            h = if i == last { z.clone() } else { relu(&z) };
            pre.push(z);
        }
        Ok((inputs, pre, h))
    }

    /// Accumulates gradients of the batch-mean MSE against `targets`.
    /// Returns the loss gradient's source value for diagnostics.
    pub(crate) fn backward(
        &mut self,
        inputs: &[Tensor],
        pre: &[Tensor],
        output: &Tensor,
        targets: &Tensor,
    ) -> Result<(), NnError> {
        let mut g = mse_grad(output, targets)?;
        for i in (0..self.layers.len()).rev() {
            let gh = self.layers[i].backward(&inputs[i], &g)?;
            g = if i == 0 {
                gh
            } else {
                relu_backward(&pre[i - 1], &gh)
            };
        }
        Ok(())
    }
}

impl Net for AEModel {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        for (i, layer) in self.layers.iter().enumerate() {
            f(&format!("fc{i}.weight"), &layer.weight);
            f(&format!("fc{i}.bias"), &layer.bias);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            f(&format!("fc{i}.weight"), &mut layer.weight);
            f(&format!("fc{i}.bias"), &mut layer.bias);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn reference_shape_has_symmetric_bottleneck() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let model = AEModel::new(400, &[300, 200, 300], &mut rng).unwrap();
        assert_eq!(model.sizes(), &[400, 300, 200, 300, 400]);
        assert_eq!(model.dim(), 400);
        assert_eq!(model.bottleneck(), 200);
        assert_eq!(model.param_count(), 400 * 300 + 300 + 300 * 200 + 200 + 200 * 300 + 300 + 300 * 400 + 400);
    }

    #[test]
    fn asymmetric_hidden_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(
            AEModel::new(400, &[300, 200, 100], &mut rng),
            Err(AeError::BadConfig(_))
        ));
        assert!(AEModel::new(400, &[], &mut rng).is_err());
    }

    #[test]
    fn untrained_forward_is_finite_for_finite_input() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let model = AEModel::new(32, &[24, 16, 24], &mut rng).unwrap();
        let x = crate::nncore::uniform_symmetric(&[32], 100.0, &mut rng);
        let y = model.forward(&x).unwrap();
        assert_eq!(y.shape(), &[32]);
        y.ensure_finite("ae output").unwrap();
    }

    #[test]
    fn zero_weights_reproduce_the_output_bias() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut model = AEModel::new(6, &[4, 4, 4], &mut rng).unwrap();
        model.visit_params_mut(&mut |name, p| {
            if name.ends_with("weight") {
                p.value.fill(0.0);
            }
        });
        let bias: Vec<f64> = vec![0.5, -1.0, 0.25, 0.0, 2.0, -0.125];
        let n_layers = 4;
        model.visit_params_mut(&mut |name, p| {
            if name == format!("fc{}.bias", n_layers - 1) {
                p.value = Tensor::vector(&bias);
            }
        });
        let x = Tensor::vector(&[9.0, -3.0, 1.0, 0.0, 7.0, 2.0]);
        let y = model.forward(&x).unwrap();
        assert_eq!(y.data(), &bias[..]);
    }

    #[test]
    fn batched_forward_matches_single_vectors() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let model = AEModel::new(8, &[6, 6, 6], &mut rng).unwrap();
        let a = crate::nncore::uniform_symmetric(&[8], 1.0, &mut rng);
        let b = crate::nncore::uniform_symmetric(&[8], 1.0, &mut rng);
        let batch = Tensor::from_vec(&[2, 8], [a.data(), b.data()].concat()).unwrap();
        let ya = model.forward(&a).unwrap();
        let yb = model.forward(&b).unwrap();
        let y = model.forward(&batch).unwrap();
        assert_eq!(&y.data()[..8], ya.data());
        assert_eq!(&y.data()[8..], yb.data());
    }
}
