//! Trainable parameters and the visitor trait every model implements.

use super::{NnError, Tensor};

/// First/second-moment slots for Adam, allocated lazily on first step.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
}

/// A trainable tensor with its gradient accumulator and optimizer slots.
///
/// `grad` always has the same shape as `value` and is zeroed between
/// optimizer steps.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub state: Option<AdamState>,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            value,
            grad,
            state: None,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }
}

/// Parameter traversal in a stable, model-defined order.
///
/// The visit order defines checkpoint payload order and optimizer update
/// order, so it must be identical between `visit_params` and
/// `visit_params_mut` and stable across runs.
pub trait Net {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param));

    fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |_, p| p.zero_grad());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.numel());
        n
    }

    /// Scale every gradient by `s` (used to turn a batch sum into a mean).
    fn scale_grads(&mut self, s: f64) {
        self.visit_params_mut(&mut |_, p| p.grad.scale(s));
    }
}

/// Snapshot of `(name, shape)` for every parameter, in visit order.
pub fn param_layout(net: &dyn Net) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    net.visit_params(&mut |name, p| out.push((name.to_string(), p.value.shape().to_vec())));
    out
}

/// Clone every parameter gradient, in visit order.
pub fn collect_grads(net: &dyn Net) -> Vec<Tensor> {
    let mut out = Vec::new();
    net.visit_params(&mut |_, p| out.push(p.grad.clone()));
    out
}

/// Add `delta` to one coordinate of the `tensor_index`-th parameter.
pub fn nudge_param(net: &mut dyn Net, tensor_index: usize, coord: usize, delta: f64) {
    let mut i = 0;
    net.visit_params_mut(&mut |_, p| {
        if i == tensor_index {
            p.value.data_mut()[coord] += delta;
        }
        i += 1;
    });
}

/// Fail if any gradient is non-finite, naming the offending parameter.
pub fn ensure_finite_grads(net: &dyn Net) -> Result<(), NnError> {
    let mut bad: Option<NnError> = None;
    net.visit_params(&mut |name, p| {
        if bad.is_none() {
            if let Err(e) = p.grad.ensure_finite(&format!("gradient of {name}")) {
                bad = Some(e);
            }
        }
    });
    match bad {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Fail if any parameter value is non-finite, naming the offender. Run
/// after optimizer steps so a divergence is caught where it happens.
pub fn ensure_finite_params(net: &dyn Net) -> Result<(), NnError> {
    let mut bad: Option<NnError> = None;
    net.visit_params(&mut |name, p| {
        if bad.is_none() {
            if let Err(e) = p.value.ensure_finite(name) {
                bad = Some(e);
            }
        }
    });
    match bad {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
