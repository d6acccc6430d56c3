//! Triple-branch model: metric learning with a triplet hinge.

use super::encoder::{EncoderCache, EncoderModel};
use super::{EncoderProfile, SiameseError};
use crate::nncore::{l2_normalize, triplet_grads, triplet_loss, Net, Param, Tensor};
use rand::Rng;

/// Three weight-shared encoder branches, each followed by
/// l2-normalization, trained so an anchor lands closer to its client
/// than to its impostor by at least `margin` (squared Euclidean
/// distances on the unit sphere).
///
/// At inference any single branch — i.e. the one shared encoder — embeds
/// utterances, and trials are scored by cosine.
#[derive(Debug, Clone)]
pub struct TripleBranchModel {
    encoder: EncoderModel,
    margin: f64,
}

/// Per-branch caches plus the unit-norm embeddings for one triplet.
pub struct TripleCache {
    anchor: (EncoderCache, Tensor),
    client: (EncoderCache, Tensor),
    impostor: (EncoderCache, Tensor),
    pub loss: f64,
}

impl TripleBranchModel {
    pub fn new(
        profile: EncoderProfile,
        margin: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, SiameseError> {
        if !margin.is_finite() || margin < 0.0 {
            return Err(SiameseError::BadConfig(format!(
                "triplet margin must be finite and >= 0, got {margin}"
            )));
        }
        Ok(TripleBranchModel {
            encoder: EncoderModel::new(profile, rng)?,
            margin,
        })
    }

    pub fn encoder(&self) -> &EncoderModel {
        &self.encoder
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Unit-norm embedding of one feature matrix.
    pub fn embed(&self, feats: &Tensor) -> Result<Tensor, SiameseError> {
        self.encoder.embed_unit(feats)
    }

    fn branch(&self, feats: &Tensor) -> Result<(EncoderCache, Tensor), SiameseError> {
        let cache = self.encoder.forward_cached(feats)?;
        let unit = l2_normalize(&cache.output)?;
        Ok((cache, unit))
    }

    /// Runs all three branches and evaluates the hinge.
    pub fn forward_cached(
        &self,
        anchor: &Tensor,
        client: &Tensor,
        impostor: &Tensor,
    ) -> Result<TripleCache, SiameseError> {
        let a = self.branch(anchor)?;
        let c = self.branch(client)?;
        let i = self.branch(impostor)?;
        let loss = triplet_loss(a.1.data(), c.1.data(), i.1.data(), self.margin)?;
        Ok(TripleCache {
            anchor: a,
            client: c,
            impostor: i,
            loss,
        })
    }

    /// Triplet loss without retaining activations.
    pub fn forward(
        &self,
        anchor: &Tensor,
        client: &Tensor,
        impostor: &Tensor,
    ) -> Result<f64, SiameseError> {
        let (a, c, i) = (
            self.embed(anchor)?,
            self.embed(client)?,
            self.embed(impostor)?,
        );
        Ok(triplet_loss(a.data(), c.data(), i.data(), self.margin)?)
    }

    /// Accumulates gradients for one triplet. All three branches
    /// backpropagate through the same encoder parameters.
    pub fn backward(&mut self, cache: &TripleCache) -> Result<(), SiameseError> {
        let (_, ga, gc, gi) = triplet_grads(
            cache.anchor.1.data(),
            cache.client.1.data(),
            cache.impostor.1.data(),
            self.margin,
        )?;
        let dim = ga.len();
        let as_tensor = |g: Vec<f64>| Tensor::from_vec(&[dim], g);
        self.encoder.backward_unit(&cache.anchor.0, &as_tensor(ga)?)?;
        self.encoder.backward_unit(&cache.client.0, &as_tensor(gc)?)?;
        self.encoder.backward_unit(&cache.impostor.0, &as_tensor(gi)?)?;
        Ok(())
    }
}

impl Net for TripleBranchModel {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        self.encoder.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        self.encoder.visit_params_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn tiny_triple(margin: f64, seed: u64) -> TripleBranchModel {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        TripleBranchModel::new(EncoderProfile::tiny(), margin, &mut rng).unwrap()
    }

    fn random_feats(frames: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let data = (0..8 * frames).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Tensor::from_vec(&[8, frames], data).unwrap()
    }

    #[test]
    fn embeddings_are_unit_norm() {
        let model = tiny_triple(0.2, 1);
        for seed in 0..4 {
            let e = model.embed(&random_feats(20, seed)).unwrap();
            let norm = e.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "norm {norm}");
        }
    }

    #[test]
    fn zero_margin_loss_is_nonnegative_hinge() {
        let model = tiny_triple(0.0, 2);
        let loss = model
            .forward(
                &random_feats(16, 3),
                &random_feats(16, 4),
                &random_feats(16, 5),
            )
            .unwrap();
        assert!(loss >= 0.0);
        // With zero margin the hinge is exactly max(0, d_ac - d_ai).
        let (a, c, i) = (
            model.embed(&random_feats(16, 3)).unwrap(),
            model.embed(&random_feats(16, 4)).unwrap(),
            model.embed(&random_feats(16, 5)).unwrap(),
        );
        let d = |x: &Tensor, y: &Tensor| {
            x.data()
                .iter()
                .zip(y.data())
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
        };
        let expect = (d(&a, &c) - d(&a, &i)).max(0.0);
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn identical_client_and_impostor_cost_the_margin() {
        let model = tiny_triple(0.35, 6);
        let anchor = random_feats(16, 7);
        let twin = random_feats(16, 8);
        let loss = model.forward(&anchor, &twin, &twin).unwrap();
        assert_eq!(loss, 0.35);
    }

    #[test]
    fn negative_margin_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        assert!(TripleBranchModel::new(EncoderProfile::tiny(), -0.1, &mut rng).is_err());
        assert!(TripleBranchModel::new(EncoderProfile::tiny(), f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        use crate::nncore::{grad_check, Fragment, GradCheckConfig, NnError};

        struct TripletFragment {
            model: TripleBranchModel,
            a: Tensor,
            c: Tensor,
            i: Tensor,
        }
        impl Fragment for TripletFragment {
            fn net(&mut self) -> &mut dyn Net {
                &mut self.model
            }
            fn loss(&mut self) -> Result<f64, NnError> {
                self.model
                    .forward(&self.a, &self.c, &self.i)
                    .map_err(|e| NnError::ContractViolation(e.to_string()))
            }
            fn compute_grads(&mut self) -> Result<(), NnError> {
                self.model.zero_grads();
                let cache = self
                    .model
                    .forward_cached(&self.a, &self.c, &self.i)
                    .map_err(|e| NnError::ContractViolation(e.to_string()))?;
                self.model
                    .backward(&cache)
                    .map_err(|e| NnError::ContractViolation(e.to_string()))?;
                Ok(())
            }
        }

        // A margin of 1.0 keeps the hinge active for untrained embeddings,
        // so finite differences see a smooth function.
        let mut frag = TripletFragment {
            model: tiny_triple(1.0, 10),
            a: random_feats(16, 11),
            c: random_feats(16, 12),
            i: random_feats(16, 13),
        };
        let active = frag.model.forward(&frag.a, &frag.c, &frag.i).unwrap();
        assert!(active > 0.05, "hinge inactive, test would be vacuous");

        let config = GradCheckConfig {
            max_coords_per_tensor: Some(5),
            ..GradCheckConfig::default()
        };
        let outcome = grad_check(&mut frag, &config).unwrap();
        assert!(
            outcome.passed,
            "max rel err {:.3e} at {:?}",
            outcome.max_rel_err, outcome.worst
        );
    }
}
