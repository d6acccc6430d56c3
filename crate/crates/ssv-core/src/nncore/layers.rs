//! Layers and elementwise primitives with hand-written backward passes.
//!
//! Layers hold no forward state: `forward` borrows the layer immutably and
//! callers keep whatever activations the matching `backward` needs. Backward
//! passes accumulate into `Param::grad` (they never overwrite), so one batch
//! can sum gradients across samples before an optimizer step.

use super::param::Param;
use super::tensor::{axpy, dot};
use super::{kaiming_uniform, uniform_symmetric, NnError, Tensor};
use rand::Rng;

/// 2-d convolution, stride 1, square zero padding.
///
/// Weight layout `[c_out, c_in, kh, kw]`. With a 3x3 kernel and padding 1
/// the spatial size is preserved, which is what the encoder stack relies on.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub padding: usize,
}

impl Conv2d {
    pub fn new(c_in: usize, c_out: usize, kh: usize, kw: usize, padding: usize, rng: &mut impl Rng) -> Self {
        let fan_in = c_in * kh * kw;
        Conv2d {
            weight: Param::new(kaiming_uniform(&[c_out, c_in, kh, kw], fan_in, rng)),
            bias: Param::new(Tensor::zeros(&[c_out])),
            padding,
        }
    }

    /// Input `[c_in, h, w]` -> output `[c_out, h + 2p - kh + 1, w + 2p - kw + 1]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let (c_in, h, w) = x.dims3()?;
        let (c_out, wc_in, kh, kw) = self.weight.value.dims4()?;
        if wc_in != c_in {
            return Err(NnError::Shape(format!(
                "conv2d channel mismatch: input has {c_in} channels, weights expect {wc_in}"
            )));
        }
        let p = self.padding;
        let (oh, ow) = conv_out_size(h, w, kh, kw, p)?;

        let mut out = Tensor::zeros(&[c_out, oh, ow]);
        let xd = x.data();
        let wd = self.weight.value.data();
        let bd = self.bias.value.data();
        let od = out.data_mut();

        for co in 0..c_out {
            let o_base = co * oh * ow;
            od[o_base..o_base + oh * ow].iter_mut().for_each(|v| *v = bd[co]);
            for ci in 0..c_in {
                let x_base = ci * h * w;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = wd[((co * c_in + ci) * kh + ky) * kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        // Output row oy reads input row iy = oy + ky - p.
                        for oy in 0..oh {
                            let iy = oy + ky;
                            if iy < p || iy - p >= h {
                                continue;
                            }
                            let iy = iy - p;
                            // Valid ox range so that ix = ox + kx - p lands in [0, w).
                            let ox_lo = p.saturating_sub(kx);
                            let ox_hi = (w + p - kx).min(ow);
                            if ox_lo >= ox_hi {
                                continue;
                            }
                            let ix_lo = ox_lo + kx - p;
                            let orow = o_base + oy * ow;
                            let xrow = x_base + iy * w;
                            axpy(
                                &mut od[orow + ox_lo..orow + ox_hi],
                                wv,
                                &xd[xrow + ix_lo..xrow + ix_lo + (ox_hi - ox_lo)],
                            );
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    /// `x` must be the tensor passed to the matching `forward`.
    pub fn backward(&mut self, x: &Tensor, gy: &Tensor) -> Result<Tensor, NnError> {
        let (c_in, h, w) = x.dims3()?;
        let (c_out, _, kh, kw) = self.weight.value.dims4()?;
        let p = self.padding;
        let (oh, ow) = conv_out_size(h, w, kh, kw, p)?;
        if gy.shape() != [c_out, oh, ow] {
            return Err(NnError::Shape(format!(
                "conv2d backward expects upstream grad [{c_out}, {oh}, {ow}], got {:?}",
                gy.shape()
            )));
        }

        let xd = x.data();
        let gyd = gy.data();

        // Bias: sum of upstream grad per output channel.
        {
            let gb = self.bias.grad.data_mut();
            for (co, g) in gb.iter_mut().enumerate().take(c_out) {
                let base = co * oh * ow;
                *g += gyd[base..base + oh * ow].iter().sum::<f64>();
            }
        }

        // Weights: each kernel cell is a dot between shifted input and grad rows.
        {
            let gw = self.weight.grad.data_mut();
            for co in 0..c_out {
                let gy_base = co * oh * ow;
                for ci in 0..c_in {
                    let x_base = ci * h * w;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let mut acc = 0.0;
                            for oy in 0..oh {
                                let iy = oy + ky;
                                if iy < p || iy - p >= h {
                                    continue;
                                }
                                let iy = iy - p;
                                let ox_lo = p.saturating_sub(kx);
                                let ox_hi = (w + p - kx).min(ow);
                                if ox_lo >= ox_hi {
                                    continue;
                                }
                                let ix_lo = ox_lo + kx - p;
                                let grow = gy_base + oy * ow;
                                let xrow = x_base + iy * w;
                                acc += dot(
                                    &gyd[grow + ox_lo..grow + ox_hi],
                                    &xd[xrow + ix_lo..xrow + ix_lo + (ox_hi - ox_lo)],
                                );
                            }
                            gw[((co * c_in + ci) * kh + ky) * kw + kx] += acc;
                        }
                    }
                }
            }
        }

        // Input: correlation of upstream grad with the kernel, shifts reversed.
        let mut gx = Tensor::zeros(&[c_in, h, w]);
        {
            let gxd = gx.data_mut();
            let wd = self.weight.value.data();
            for co in 0..c_out {
                let gy_base = co * oh * ow;
                for ci in 0..c_in {
                    let x_base = ci * h * w;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let wv = wd[((co * c_in + ci) * kh + ky) * kw + kx];
                            if wv == 0.0 {
                                continue;
                            }
                            for oy in 0..oh {
                                let iy = oy + ky;
                                if iy < p || iy - p >= h {
                                    continue;
                                }
                                let iy = iy - p;
                                let ox_lo = p.saturating_sub(kx);
                                let ox_hi = (w + p - kx).min(ow);
                                if ox_lo >= ox_hi {
                                    continue;
                                }
                                let ix_lo = ox_lo + kx - p;
                                let grow = gy_base + oy * ow;
                                let xrow = x_base + iy * w;
                                axpy(
                                    &mut gxd[xrow + ix_lo..xrow + ix_lo + (ox_hi - ox_lo)],
                                    wv,
                                    &gyd[grow + ox_lo..grow + ox_hi],
                                );
                            }
                        }
                    }
                }
            }
        }
        Ok(gx)
    }
}

fn conv_out_size(h: usize, w: usize, kh: usize, kw: usize, p: usize) -> Result<(usize, usize), NnError> {
    let oh = (h + 2 * p).checked_sub(kh - 1).filter(|&v| v > 0);
    let ow = (w + 2 * p).checked_sub(kw - 1).filter(|&v| v > 0);
    match (oh, ow) {
        (Some(oh), Some(ow)) => Ok((oh, ow)),
        _ => Err(NnError::Shape(format!(
            "conv2d input {h}x{w} too small for kernel {kh}x{kw} with padding {p}"
        ))),
    }
}

/// 2x2 max pooling with stride 2 and floor semantics: odd trailing rows and
/// columns are dropped, so 87 frames pool to 43.
///
/// Returns the pooled tensor and the flat input index of each window max
/// (first maximum wins on ties), which `maxpool2d_backward` routes gradients to.
pub fn maxpool2d(x: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
    let (c, h, w) = x.dims3()?;
    if h < 2 || w < 2 {
        return Err(NnError::Shape(format!(
            "maxpool2d needs at least 2x2 spatial input, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let i00 = (ci * h + 2 * oy) * w + 2 * ox;
                let cand = [i00, i00 + 1, i00 + w, i00 + w + 1];
                let mut best = cand[0];
                for &idx in &cand[1..] {
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                let o = (ci * oh + oy) * ow + ox;
                od[o] = xd[best];
                argmax[o] = best;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2d_backward(input_shape: &[usize], argmax: &[usize], gy: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(input_shape);
    let gxd = gx.data_mut();
    for (o, &i) in argmax.iter().enumerate() {
        gxd[i] += gy.data()[o];
    }
    gx
}

/// Fully connected layer. Weight layout `[in, out]` so the forward inner
/// loop runs contiguously over outputs; accepts `[in]` or batched `[b, in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Linear {
            weight: Param::new(kaiming_uniform(&[in_dim, out_dim], in_dim, rng)),
            bias: Param::new(Tensor::zeros(&[out_dim])),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        let (batch, flat) = match x.shape() {
            [n] => (1, *n),
            [b, n] => (*b, *n),
            other => {
                return Err(NnError::Shape(format!(
                    "linear expects 1-d or 2-d input, got {other:?}"
                )))
            }
        };
        if flat != in_dim {
            return Err(NnError::Shape(format!(
                "linear expects input dim {in_dim}, got {flat}"
            )));
        }
        let mut out = if x.shape().len() == 1 {
            Tensor::zeros(&[out_dim])
        } else {
            Tensor::zeros(&[batch, out_dim])
        };
        let xd = x.data();
        let wd = self.weight.value.data();
        let bd = self.bias.value.data();
        let od = out.data_mut();
        for b in 0..batch {
            let orow = &mut od[b * out_dim..(b + 1) * out_dim];
            orow.copy_from_slice(bd);
            let xrow = &xd[b * in_dim..(b + 1) * in_dim];
            for (i, &xi) in xrow.iter().enumerate() {
                if xi != 0.0 {
                    axpy(orow, xi, &wd[i * out_dim..(i + 1) * out_dim]);
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, x: &Tensor, gy: &Tensor) -> Result<Tensor, NnError> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        let batch = if x.shape().len() == 1 { 1 } else { x.shape()[0] };
        if gy.numel() != batch * out_dim {
            return Err(NnError::Shape(format!(
                "linear backward expects {batch}x{out_dim} upstream grad, got {:?}",
                gy.shape()
            )));
        }
        let xd = x.data();
        let gyd = gy.data();
        {
            let gw = self.weight.grad.data_mut();
            let gb = self.bias.grad.data_mut();
            for b in 0..batch {
                let grow = &gyd[b * out_dim..(b + 1) * out_dim];
                let xrow = &xd[b * in_dim..(b + 1) * in_dim];
                for (i, &xi) in xrow.iter().enumerate() {
                    if xi != 0.0 {
                        axpy(&mut gw[i * out_dim..(i + 1) * out_dim], xi, grow);
                    }
                }
                for (gbo, &g) in gb.iter_mut().zip(grow) {
                    *gbo += g;
                }
            }
        }
        let mut gx = Tensor::zeros(x.shape());
        {
            let gxd = gx.data_mut();
            let wd = self.weight.value.data();
            for b in 0..batch {
                let grow = &gyd[b * out_dim..(b + 1) * out_dim];
                let xrow = &mut gxd[b * in_dim..(b + 1) * in_dim];
                for (i, gxi) in xrow.iter_mut().enumerate() {
                    *gxi = dot(grow, &wd[i * out_dim..(i + 1) * out_dim]);
                }
            }
        }
        Ok(gx)
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// `x` is the pre-activation input of the matching forward call.
pub fn relu_backward(x: &Tensor, gy: &Tensor) -> Tensor {
    debug_assert_eq!(x.shape(), gy.shape());
    let data = x
        .data()
        .iter()
        .zip(gy.data())
        .map(|(&xi, &g)| if xi > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

pub fn sigmoid_scalar(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

/// `y` is the sigmoid output of the matching forward call.
pub fn sigmoid_backward(y: &Tensor, gy: &Tensor) -> Tensor {
    debug_assert_eq!(y.shape(), gy.shape());
    let data = y
        .data()
        .iter()
        .zip(gy.data())
        .map(|(&yi, &g)| g * yi * (1.0 - yi))
        .collect();
    Tensor::from_vec(y.shape(), data).expect("same shape")
}

pub fn tanh_forward(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

/// `y` is the tanh output of the matching forward call.
pub fn tanh_backward(y: &Tensor, gy: &Tensor) -> Tensor {
    debug_assert_eq!(y.shape(), gy.shape());
    let data = y
        .data()
        .iter()
        .zip(gy.data())
        .map(|(&yi, &g)| g * (1.0 - yi * yi))
        .collect();
    Tensor::from_vec(y.shape(), data).expect("same shape")
}

/// Numerically stable softmax over a slice.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `y = softmax(scores)`; returns the gradient with respect to the scores.
pub fn softmax_backward(y: &[f64], gy: &[f64]) -> Vec<f64> {
    let inner = dot(y, gy);
    y.iter().zip(gy).map(|(&yi, &g)| yi * (g - inner)).collect()
}

/// Scales a vector to unit Euclidean norm. Vectors with norm below 1e-12
/// are rejected rather than epsilon-divided: a zero embedding is a bug
/// worth surfacing, not smoothing over.
pub fn l2_normalize(x: &Tensor) -> Result<Tensor, NnError> {
    let norm = x.norm();
    if norm < 1e-12 {
        return Err(NnError::DegenerateInput(format!(
            "l2_normalize of a near-zero vector (norm {norm:.3e})"
        )));
    }
    Ok(x.map(|v| v / norm))
}

/// Backward of `y = x / ||x||`: projects the upstream gradient onto the
/// tangent space of the unit sphere. Pass the original `x`.
pub fn l2_normalize_backward(x: &Tensor, gy: &Tensor) -> Result<Tensor, NnError> {
    let norm = x.norm();
    if norm < 1e-12 {
        return Err(NnError::DegenerateInput(
            "l2_normalize_backward of a near-zero vector".into(),
        ));
    }
    let y: Vec<f64> = x.data().iter().map(|&v| v / norm).collect();
    let inner = dot(&y, gy.data());
    let data = y
        .iter()
        .zip(gy.data())
        .map(|(&yi, &g)| (g - inner * yi) / norm)
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Self-attention pooling: collapses a `[d, t]` frame sequence into one
/// `[d]` vector via `sum_t alpha_t h_t` with
/// `alpha = softmax_t(v . tanh(W h_t + b))`.
#[derive(Debug, Clone)]
pub struct SapPool {
    pub w: Param,
    pub b: Param,
    pub v: Param,
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct SapCache {
    /// tanh(W h_t + b), column t per frame: `[attn, t]`.
    z: Tensor,
    /// Attention weights over frames, sum to 1.
    pub alpha: Vec<f64>,
}

impl SapPool {
    /// `attn_dim` x `in_dim` additive attention; W and v start uniform in
    /// +-1/sqrt(in_dim), b at zero.
    pub fn new(in_dim: usize, attn_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        SapPool {
            w: Param::new(uniform_symmetric(&[attn_dim, in_dim], bound, rng)),
            b: Param::new(Tensor::zeros(&[attn_dim])),
            v: Param::new(uniform_symmetric(&[attn_dim], bound, rng)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.value.shape()[1]
    }

    pub fn forward(&self, h: &Tensor) -> Result<Tensor, NnError> {
        Ok(self.forward_cached(h)?.0)
    }

    pub fn forward_cached(&self, h: &Tensor) -> Result<(Tensor, SapCache), NnError> {
        let (d, t) = h.dims2()?;
        if t == 0 {
            return Err(NnError::EmptyInput("sap_pool over zero frames".into()));
        }
        let (attn, in_dim) = self.w.value.dims2()?;
        if in_dim != d {
            return Err(NnError::Shape(format!(
                "sap_pool expects frame dim {in_dim}, got {d}"
            )));
        }
        let hd = h.data();
        let wd = self.w.value.data();
        let bd = self.b.value.data();
        let vd = self.v.value.data();

        // Frames are columns of h; gather each into a contiguous buffer once.
        let mut frame = vec![0.0; d];
        let mut z = Tensor::zeros(&[attn, t]);
        let mut scores = vec![0.0; t];
        for ti in 0..t {
            for di in 0..d {
                frame[di] = hd[di * t + ti];
            }
            let zd = z.data_mut();
            let mut score = 0.0;
            for a in 0..attn {
                let u = dot(&wd[a * in_dim..(a + 1) * in_dim], &frame) + bd[a];
                let zv = u.tanh();
                zd[a * t + ti] = zv;
                score += vd[a] * zv;
            }
            scores[ti] = score;
        }
        let alpha = softmax(&scores);

        let mut out = Tensor::zeros(&[d]);
        let od = out.data_mut();
        for di in 0..d {
            let row = &hd[di * t..(di + 1) * t];
            od[di] = dot(row, &alpha);
        }
        Ok((out, SapCache { z, alpha }))
    }

    /// Accumulates attention-parameter gradients and returns grad wrt `h`.
    pub fn backward(&mut self, h: &Tensor, cache: &SapCache, gy: &Tensor) -> Result<Tensor, NnError> {
        let (d, t) = h.dims2()?;
        let (attn, _) = self.w.value.dims2()?;
        let hd = h.data();
        let gyd = gy.data();
        let zd = cache.z.data();
        let alpha = &cache.alpha;

        // d(out)/d(alpha_t) = gy . h_t
        let mut g_alpha = vec![0.0; t];
        for ti in 0..t {
            let mut s = 0.0;
            for di in 0..d {
                s += gyd[di] * hd[di * t + ti];
            }
            g_alpha[ti] = s;
        }
        let g_scores = softmax_backward(alpha, &g_alpha);

        let mut gx = Tensor::zeros(&[d, t]);
        let gxd = gx.data_mut();
        // Direct path: out = sum_t alpha_t h_t.
        for di in 0..d {
            for ti in 0..t {
                gxd[di * t + ti] = alpha[ti] * gyd[di];
            }
        }

        let vd = self.v.value.data();
        let wd = self.w.value.data();
        let mut frame = vec![0.0; d];
        let mut gu = vec![0.0; attn];
        for ti in 0..t {
            if g_scores[ti] == 0.0 {
                continue;
            }
            for di in 0..d {
                frame[di] = hd[di * t + ti];
            }
            for a in 0..attn {
                let zv = zd[a * t + ti];
                gu[a] = g_scores[ti] * vd[a] * (1.0 - zv * zv);
            }
            {
                let gv = self.v.grad.data_mut();
                for a in 0..attn {
                    gv[a] += g_scores[ti] * zd[a * t + ti];
                }
            }
            {
                let gw = self.w.grad.data_mut();
                let gb = self.b.grad.data_mut();
                for a in 0..attn {
                    if gu[a] != 0.0 {
                        axpy(&mut gw[a * d..(a + 1) * d], gu[a], &frame);
                        gb[a] += gu[a];
                    }
                }
            }
            // Score path into the frames: W^T gu.
            for a in 0..attn {
                if gu[a] != 0.0 {
                    let wrow = &wd[a * d..(a + 1) * d];
                    for di in 0..d {
                        gxd[di * t + ti] += gu[a] * wrow[di];
                    }
                }
            }
        }
        Ok(gx)
    }
}
