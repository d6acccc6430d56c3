//! Minimal dense-tensor neural core: layers, losses, optimizers, and
//! finite-difference gradient verification.
//!
//! Everything is 64-bit and deterministic. Forward passes borrow models
//! immutably and are safe to run concurrently; training mutates parameters
//! single-threaded.

mod checkpoint;
mod gradcheck;
mod init;
mod layers;
mod loss;
mod optim;
mod param;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, Fragment, GradCheckConfig, GradCheckOutcome};
pub use init::{kaiming_uniform, uniform_symmetric};
pub use layers::{
    l2_normalize, l2_normalize_backward, maxpool2d, maxpool2d_backward, relu, relu_backward,
    sigmoid, sigmoid_backward, sigmoid_scalar, softmax, softmax_backward, tanh_backward,
    tanh_forward, Conv2d, Linear, SapCache, SapPool,
};
pub use loss::{
    bce_grad_wrt_logit, bce_grad_wrt_p, bce_loss, mse_grad, mse_loss, triplet_grads, triplet_loss,
    BCE_EPS,
};
pub use optim::{optimizer_step, DecayKind, OptimizerConfig, OptimizerKind};
pub use param::{
    collect_grads, ensure_finite_grads, ensure_finite_params, nudge_param, param_layout, AdamState,
    Net, Param,
};
pub use tensor::{axpy, dot, Tensor};

use thiserror::Error;

/// Errors raised by tensor shapes, layer contracts, and training numerics.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("non-finite value in {context}: {detail}")]
    NonFinite { context: String, detail: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
