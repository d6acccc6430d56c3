//! Weight initialization.

use super::Tensor;
use rand::Rng;

/// Kaiming-uniform fan-in initialization for layers followed by ReLU:
/// samples from `U(-b, b)` with `b = sqrt(6 / fan_in)`.
pub fn kaiming_uniform(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    uniform_symmetric(shape, bound, rng)
}

/// Samples every element from `U(-bound, bound)`.
pub fn uniform_symmetric(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).expect("generated element count matches shape")
}
