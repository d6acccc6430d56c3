//! The gradient-check battery: every differentiable building block and
//! both siamese models, each frozen into a deterministic [`Fragment`]
//! with fixed inputs.
//!
//! The `gradcheck` subcommand runs this battery and prints one line per
//! check; the acceptance suite runs the same battery, so what the CLI
//! reports and what the tests enforce cannot drift apart.
//!
//! Layer fragments check every coordinate. Model fragments subsample
//! coordinates per tensor (seeded, so reruns check the same ones) to keep
//! the battery in the seconds range on one core.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use ssv_core::nncore::{
    bce_grad_wrt_logit, bce_loss, grad_check, l2_normalize, l2_normalize_backward, maxpool2d,
    maxpool2d_backward, mse_grad, mse_loss, relu, relu_backward, sigmoid_scalar, triplet_grads,
    triplet_loss, uniform_symmetric, Conv2d, Fragment, GradCheckConfig, GradCheckOutcome, Linear,
    Net, NnError, Param, SapPool, Tensor,
};
use ssv_core::siamese::{
    DoubleBranchModel, EncoderModel, EncoderProfile, SiameseError, TripleBranchModel,
};

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    uniform_symmetric(shape, 1.0, &mut rng)
}

fn flat(e: SiameseError) -> NnError {
    NnError::ContractViolation(e.to_string())
}

/// One named check: a fragment plus the configuration it runs under.
pub struct CheckSpec {
    pub name: &'static str,
    pub fragment: Box<dyn Fragment>,
    pub config: GradCheckConfig,
}

pub struct CheckResult {
    pub name: &'static str,
    pub outcome: GradCheckOutcome,
}

/// Runs the full battery, in order. Errors only on contract violations
/// (shape mismatches etc.); a failed check is a normal result with
/// `outcome.passed == false`.
pub fn run_battery() -> Result<Vec<CheckResult>, NnError> {
    let mut results = Vec::new();
    for mut spec in battery() {
        let outcome = grad_check(spec.fragment.as_mut(), &spec.config)?;
        results.push(CheckResult {
            name: spec.name,
            outcome,
        });
    }
    Ok(results)
}

pub fn battery() -> Vec<CheckSpec> {
    let full = GradCheckConfig::default();
    let sampled = GradCheckConfig {
        max_coords_per_tensor: Some(8),
        sample_seed: 17,
        ..GradCheckConfig::default()
    };
    vec![
        CheckSpec {
            name: "linear+mse",
            fragment: Box::new(LinearMse::new(1)),
            config: full,
        },
        CheckSpec {
            name: "linear+l2norm+mse",
            fragment: Box::new(NormalizedLinearMse::new(2)),
            config: full,
        },
        CheckSpec {
            name: "linear+bce",
            fragment: Box::new(LinearBce::new(3)),
            config: full,
        },
        CheckSpec {
            name: "conv+mse",
            fragment: Box::new(ConvMse::new(4)),
            config: full,
        },
        CheckSpec {
            name: "sap+mse",
            fragment: Box::new(SapMse::new(5)),
            config: full,
        },
        CheckSpec {
            name: "conv+relu+maxpool+linear+bce",
            fragment: Box::new(ConvStackBce::new(6)),
            config: full,
        },
        CheckSpec {
            name: "linear3x+triplet",
            fragment: Box::new(SharedTriplet::new(7)),
            config: full,
        },
        CheckSpec {
            name: "encoder(tiny)+mse",
            fragment: Box::new(EncoderMse::new(8)),
            config: sampled,
        },
        CheckSpec {
            name: "double-branch(tiny)+bce",
            fragment: Box::new(DoubleBce::new(9)),
            config: sampled,
        },
        CheckSpec {
            name: "triple-branch(tiny)+hinge",
            fragment: Box::new(TripleHinge::new(10)),
            config: sampled,
        },
    ]
}

struct LinearMse {
    lin: Linear,
    x: Tensor,
    target: Tensor,
}

impl LinearMse {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        LinearMse {
            lin: Linear::new(6, 4, &mut rng),
            x: rand_tensor(&[6], seed + 100),
            target: rand_tensor(&[4], seed + 200),
        }
    }
}

impl Net for LinearMse {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("lin.weight", &self.lin.weight);
        f("lin.bias", &self.lin.bias);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("lin.weight", &mut self.lin.weight);
        f("lin.bias", &mut self.lin.bias);
    }
}

impl Fragment for LinearMse {
    fn net(&mut self) -> &mut dyn Net {
        self
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        mse_loss(&self.lin.forward(&self.x)?, &self.target)
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.net().zero_grads();
        let y = self.lin.forward(&self.x)?;
        let gy = mse_grad(&y, &self.target)?;
        self.lin.backward(&self.x, &gy)?;
        Ok(())
    }
}

/// Linear into a unit-normalized embedding; exercises the projection
/// backward used by cosine-space embeddings.
struct NormalizedLinearMse {
    lin: Linear,
    x: Tensor,
    target: Tensor,
}

impl NormalizedLinearMse {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        NormalizedLinearMse {
            lin: Linear::new(5, 4, &mut rng),
            x: rand_tensor(&[5], seed + 100),
            target: rand_tensor(&[4], seed + 200),
        }
    }
}

impl Net for NormalizedLinearMse {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("lin.weight", &self.lin.weight);
        f("lin.bias", &self.lin.bias);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("lin.weight", &mut self.lin.weight);
        f("lin.bias", &mut self.lin.bias);
    }
}

impl Fragment for NormalizedLinearMse {
    fn net(&mut self) -> &mut dyn Net {
        self
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        let y = self.lin.forward(&self.x)?;
        mse_loss(&l2_normalize(&y)?, &self.target)
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.net().zero_grads();
        let y = self.lin.forward(&self.x)?;
        let n = l2_normalize(&y)?;
        let gn = mse_grad(&n, &self.target)?;
        let gy = l2_normalize_backward(&y, &gn)?;
        self.lin.backward(&self.x, &gy)?;
        Ok(())
    }
}

/// Logistic regression: the BCE-from-logit gradient on its own.
struct LinearBce {
    lin: Linear,
    x: Tensor,
    label: f64,
}

impl LinearBce {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        LinearBce {
            lin: Linear::new(5, 1, &mut rng),
            x: rand_tensor(&[5], seed + 100),
            label: 0.0,
        }
    }
}

impl Net for LinearBce {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("lin.weight", &self.lin.weight);
        f("lin.bias", &self.lin.bias);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("lin.weight", &mut self.lin.weight);
        f("lin.bias", &mut self.lin.bias);
    }
}

impl Fragment for LinearBce {
    fn net(&mut self) -> &mut dyn Net {
        self
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        let z = self.lin.forward(&self.x)?;
        Ok(bce_loss(sigmoid_scalar(z.data()[0]), self.label))
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.net().zero_grads();
        let z = self.lin.forward(&self.x)?;
        let p = sigmoid_scalar(z.data()[0]);
        let gz = bce_grad_wrt_logit(p, self.label);
        self.lin.backward(&self.x, &Tensor::vector(&[gz]))?;
        Ok(())
    }
}

struct ConvMse {
    conv: Conv2d,
    x: Tensor,
    target: Tensor,
}

impl ConvMse {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        ConvMse {
            conv: Conv2d::new(2, 3, 3, 3, 1, &mut rng),
            x: rand_tensor(&[2, 5, 6], seed + 100),
            target: rand_tensor(&[3, 5, 6], seed + 200),
        }
    }
}

impl Net for ConvMse {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("conv.weight", &self.conv.weight);
        f("conv.bias", &self.conv.bias);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("conv.weight", &mut self.conv.weight);
        f("conv.bias", &mut self.conv.bias);
    }
}

impl Fragment for ConvMse {
    fn net(&mut self) -> &mut dyn Net {
        self
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        mse_loss(&self.conv.forward(&self.x)?, &self.target)
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.net().zero_grads();
        let y = self.conv.forward(&self.x)?;
        let gy = mse_grad(&y, &self.target)?;
        self.conv.backward(&self.x, &gy)?;
        Ok(())
    }
}

/// Attention pooling alone; covers the tanh and softmax backwards.
struct SapMse {
    sap: SapPool,
    frames: Tensor,
    target: Tensor,
}

impl SapMse {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        SapMse {
            sap: SapPool::new(6, 4, &mut rng),
            frames: rand_tensor(&[6, 5], seed + 100),
            target: rand_tensor(&[6], seed + 200),
        }
    }
}

impl Net for SapMse {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("sap.w", &self.sap.w);
        f("sap.b", &self.sap.b);
        f("sap.v", &self.sap.v);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("sap.w", &mut self.sap.w);
        f("sap.b", &mut self.sap.b);
        f("sap.v", &mut self.sap.v);
    }
}

impl Fragment for SapMse {
    fn net(&mut self) -> &mut dyn Net {
        self
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        mse_loss(&self.sap.forward(&self.frames)?, &self.target)
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.net().zero_grads();
        let (pooled, cache) = self.sap.forward_cached(&self.frames)?;
        let gy = mse_grad(&pooled, &self.target)?;
        self.sap.backward(&self.frames, &cache, &gy)?;
        Ok(())
    }
}

/// The inter-layer plumbing check: conv into relu into maxpool into a
/// linear classifier, so the pool routing and relu mask backwards run
/// inside a composition rather than in isolation.
struct ConvStackBce {
    conv: Conv2d,
    lin: Linear,
    x: Tensor,
}

impl ConvStackBce {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        ConvStackBce {
            conv: Conv2d::new(1, 2, 3, 3, 1, &mut rng),
            lin: Linear::new(12, 1, &mut rng),
            x: rand_tensor(&[1, 4, 6], seed + 100),
        }
    }

    fn run(&mut self, backward: bool) -> Result<f64, NnError> {
        let a = self.conv.forward(&self.x)?; // [2,4,6]
        let r = relu(&a);
        let (p, argmax) = maxpool2d(&r)?; // [2,2,3]
        let flat = p.clone().reshape(&[12])?;
        let z = self.lin.forward(&flat)?;
        let prob = sigmoid_scalar(z.data()[0]);
        let loss = bce_loss(prob, 1.0);
        if backward {
            let gz = Tensor::vector(&[bce_grad_wrt_logit(prob, 1.0)]);
            let gflat = self.lin.backward(&flat, &gz)?;
            let gp = gflat.reshape(&[2, 2, 3])?;
            let gr = maxpool2d_backward(&[2, 4, 6], &argmax, &gp);
            let ga = relu_backward(&a, &gr);
            self.conv.backward(&self.x, &ga)?;
        }
        Ok(loss)
    }
}

impl Net for ConvStackBce {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("conv.weight", &self.conv.weight);
        f("conv.bias", &self.conv.bias);
        f("lin.weight", &self.lin.weight);
        f("lin.bias", &self.lin.bias);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("conv.weight", &mut self.conv.weight);
        f("conv.bias", &mut self.conv.bias);
        f("lin.weight", &mut self.lin.weight);
        f("lin.bias", &mut self.lin.bias);
    }
}

impl Fragment for ConvStackBce {
    fn net(&mut self) -> &mut dyn Net {
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

/// One shared linear embedding applied to anchor, client and impostor;
/// checks the triplet gradients including the shared-parameter sum.
struct SharedTriplet {
    lin: Linear,
    a: Tensor,
    c: Tensor,
    i: Tensor,
}

impl SharedTriplet {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        SharedTriplet {
            lin: Linear::new(6, 4, &mut rng),
            a: rand_tensor(&[6], seed + 100),
            c: rand_tensor(&[6], seed + 200),
            i: rand_tensor(&[6], seed + 300),
        }
    }

    fn embeds(&self) -> Result<(Tensor, Tensor, Tensor), NnError> {
        Ok((
            self.lin.forward(&self.a)?,
            self.lin.forward(&self.c)?,
            self.lin.forward(&self.i)?,
        ))
    }
}

impl Net for SharedTriplet {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("lin.weight", &self.lin.weight);
        f("lin.bias", &self.lin.bias);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("lin.weight", &mut self.lin.weight);
        f("lin.bias", &mut self.lin.bias);
    }
}

impl Fragment for SharedTriplet {
    fn net(&mut self) -> &mut dyn Net {
        self
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        let (ea, ec, ei) = self.embeds()?;
        // a wide margin keeps the hinge active for random weights, so the
        // finite differences see a smooth function
        triplet_loss(ea.data(), ec.data(), ei.data(), 1.0)
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.net().zero_grads();
        let (ea, ec, ei) = self.embeds()?;
        let (_, ga, gc, gi) = triplet_grads(ea.data(), ec.data(), ei.data(), 1.0)?;
        self.lin.backward(&self.a, &Tensor::vector(&ga))?;
        self.lin.backward(&self.c, &Tensor::vector(&gc))?;
        self.lin.backward(&self.i, &Tensor::vector(&gi))?;
        Ok(())
    }
}

struct EncoderMse {
    enc: EncoderModel,
    feats: Tensor,
    target: Tensor,
}

impl EncoderMse {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let enc = EncoderModel::new(EncoderProfile::tiny(), &mut rng).expect("tiny profile");
        EncoderMse {
            enc,
            feats: rand_tensor(&[8, 16], seed + 100),
            target: rand_tensor(&[25], seed + 200),
        }
    }
}

impl Fragment for EncoderMse {
    fn net(&mut self) -> &mut dyn Net {
        &mut self.enc
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        let out = self.enc.forward(&self.feats).map_err(flat)?;
        mse_loss(&out, &self.target)
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.enc.zero_grads();
        let cache = self.enc.forward_cached(&self.feats).map_err(flat)?;
        let gy = mse_grad(&cache.output, &self.target)?;
        self.enc.backward(&cache, &gy).map_err(flat)?;
        Ok(())
    }
}

struct DoubleBce {
    model: DoubleBranchModel,
    a: Tensor,
    b: Tensor,
    label: f64,
}

impl DoubleBce {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model =
            DoubleBranchModel::with_default_head(EncoderProfile::tiny(), &mut rng).expect("tiny");
        DoubleBce {
            model,
            a: rand_tensor(&[8, 16], seed + 100),
            b: rand_tensor(&[8, 16], seed + 200),
            label: 1.0,
        }
    }
}

impl Fragment for DoubleBce {
    fn net(&mut self) -> &mut dyn Net {
        &mut self.model
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        let score = self.model.forward(&self.a, &self.b).map_err(flat)?;
        Ok(bce_loss(score, self.label))
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.model.zero_grads();
        let cache = self.model.forward_cached(&self.a, &self.b).map_err(flat)?;
        self.model
            .backward(&cache, cache.score - self.label)
            .map_err(flat)?;
        Ok(())
    }
}

struct TripleHinge {
    model: TripleBranchModel,
    a: Tensor,
    c: Tensor,
    i: Tensor,
}

impl TripleHinge {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model =
            TripleBranchModel::new(EncoderProfile::tiny(), 1.0, &mut rng).expect("tiny");
        let frag = TripleHinge {
            model,
            a: rand_tensor(&[8, 16], seed + 100),
            c: rand_tensor(&[8, 16], seed + 200),
            i: rand_tensor(&[8, 16], seed + 300),
        };
        let loss = frag
            .model
            .forward(&frag.a, &frag.c, &frag.i)
            .expect("tiny forward");
        assert!(loss > 0.05, "hinge inactive; the check would be vacuous");
        frag
    }
}

impl Fragment for TripleHinge {
    fn net(&mut self) -> &mut dyn Net {
        &mut self.model
    }
    fn loss(&mut self) -> Result<f64, NnError> {
        self.model.forward(&self.a, &self.c, &self.i).map_err(flat)
    }
    fn compute_grads(&mut self) -> Result<(), NnError> {
        self.model.zero_grads();
        let cache = self
            .model
            .forward_cached(&self.a, &self.c, &self.i)
            .map_err(flat)?;
        self.model.backward(&cache).map_err(flat)?;
        Ok(())
    }
}
