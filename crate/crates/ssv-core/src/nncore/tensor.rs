//! Dense row-major `f64` tensors, the currency of every neural module.

use super::NnError;

/// A dense n-dimensional array of 64-bit floats in row-major order.
///
/// Invariant: `shape.iter().product() == data.len()`. Scalars are
/// represented as shape `[1]`; there is no zero-rank tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(NnError::Shape(format!(
                "zero-sized dimension in shape {shape:?}"
            )));
        }
        if n != data.len() {
            return Err(NnError::Shape(format!(
                "shape {shape:?} implies {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// 1-d tensor from a slice.
    pub fn vector(values: &[f64]) -> Self {
        Tensor {
            shape: vec![values.len()],
            data: values.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterpret the same buffer under a new shape with equal element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(NnError::Shape(format!(
                "cannot reshape {:?} ({} elems) to {shape:?} ({n} elems)",
                self.shape,
                self.data.len()
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn dims2(&self) -> Result<(usize, usize), NnError> {
        match self.shape[..] {
            [a, b] => Ok((a, b)),
            _ => Err(NnError::Shape(format!(
                "expected 2-d tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn dims3(&self) -> Result<(usize, usize, usize), NnError> {
        match self.shape[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => Err(NnError::Shape(format!(
                "expected 3-d tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn dims4(&self) -> Result<(usize, usize, usize, usize), NnError> {
        match self.shape[..] {
            [a, b, c, d] => Ok((a, b, c, d)),
            _ => Err(NnError::Shape(format!(
                "expected 4-d tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with `context` if any element is NaN or infinite.
    pub fn ensure_finite(&self, context: &str) -> Result<(), NnError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(NnError::NonFinite {
                context: context.to_string(),
                detail: format!("element {i} of shape {:?} is {}", self.shape, self.data[i]),
            }),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += other`, shapes must match exactly.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<(), NnError> {
        if self.shape != other.shape {
            return Err(NnError::Shape(format!(
                "add_assign shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }
}

/// Dot product with a fixed four-lane accumulation order.
///
/// The lane split keeps the loop vectorizable under strict IEEE semantics
/// while remaining bit-for-bit deterministic across runs.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..chunks {
        let j = i * 4;
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (s0 + s1) + (s2 + s3) + tail
}

/// `acc += c * x` over slices of equal length.
pub fn axpy(acc: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += c * v;
    }
}
