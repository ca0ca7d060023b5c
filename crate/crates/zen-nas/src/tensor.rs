//! Forward-only NCHW tensor kernel.
//!
//! Exactly the operations the scoring pipeline needs: seeded Gaussian
//! sampling, direct convolution, the two batch-norm variants, ReLU, max
//! pooling and global average pooling, and Frobenius norms. Everything is a
//! pure function of its inputs; tensors are immutable after construction and
//! safe to share across threads.
//!
//! Convolution is cross-correlation (no kernel flip), with zero same-padding
//! of `(k-1)/2` on each side so the output spatial size is `ceil(h/stride)`.
//! Kernels carry no bias; normalization always follows.
//!
//! Computation runs in `f64` by default. The `f32` instantiation exists to
//! reproduce literal single-precision overflow in deep unnormalized
//! networks: once any op produces a non-finite entry the result is flagged
//! `overflowed` and every downstream op preserves the flag instead of
//! propagating garbage values.

use rand_distr::Distribution;
use thiserror::Error;

use crate::rng::Rng;

/// Clamp applied to zero per-channel standard deviations so degenerate
/// channels never abort a long search.
pub const BN_SIGMA_EPSILON: f64 = 1e-10;

/// Scalar type of a tensor; implemented for `f32` and `f64`.
pub trait Element:
    Copy
    + PartialOrd
    + Send
    + Sync
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::AddAssign
    + 'static
{
    fn zero() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Element for f32 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Element for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("data length {len} does not match shape {shape:?} ({expected} elements)")]
    ShapeMismatch { shape: Shape, len: usize, expected: usize },
    #[error("input has {input} channels but kernel expects {expected}")]
    ChannelMismatch { input: usize, expected: usize },
    #[error("kernel output channels {c_out} not divisible by {groups} groups")]
    BadGrouping { c_out: usize, groups: usize },
    #[error("batch norm needs at least 2 samples per channel, got {0}")]
    BnTooFewSamples(usize),
    #[error("batch norm input is overflowed or non-finite")]
    BnNonFiniteInput,
    #[error("shapes {0:?} and {1:?} differ")]
    ShapeDiffers(Shape, Shape),
}

/// NCHW shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(b: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { b, c, h, w }
    }

    pub fn numel(&self) -> usize {
        self.b * self.c * self.h * self.w
    }
}

/// Dense row-major NCHW tensor.
#[derive(Clone, Debug)]
pub struct Tensor<T: Element = f64> {
    shape: Shape,
    data: Vec<T>,
    overflowed: bool,
}

/// Result of a norm computation; `Overflow` replaces the value whenever any
/// entry is non-finite so callers never see a garbage float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    Value(f64),
    Overflow,
}

impl Norm {
    pub fn value(self) -> Option<f64> {
        match self {
            Norm::Value(v) => Some(v),
            Norm::Overflow => None,
        }
    }

    pub fn is_overflow(self) -> bool {
        matches!(self, Norm::Overflow)
    }
}

impl<T: Element> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Tensor { shape, data: vec![T::zero(); shape.numel()], overflowed: false }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self, TensorError> {
        if data.len() != shape.numel() {
            return Err(TensorError::ShapeMismatch { shape, len: data.len(), expected: shape.numel() });
        }
        let overflowed = data.iter().any(|v| !v.is_finite());
        Ok(Tensor { shape, data, overflowed })
    }

    /// Standard-normal tensor. Variates are drawn in `f64` and narrowed,
    /// so the `f32` and `f64` instantiations see the same sequence.
    pub fn randn(shape: Shape, rng: &mut Rng) -> Self {
        let normal = rand_distr::StandardNormal;
        let data = (0..shape.numel()).map(|_| T::from_f64(normal.sample(rng))).collect();
        Tensor { shape, data, overflowed: false }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn overflowed(&self) -> bool {
        self.overflowed
    }

    pub fn get(&self, b: usize, c: usize, h: usize, w: usize) -> T {
        let s = self.shape;
        self.data[((b * s.c + c) * s.h + h) * s.w + w]
    }

    fn flagged(shape: Shape) -> Self {
        Tensor { shape, data: vec![T::zero(); shape.numel()], overflowed: true }
    }

    fn rescan_overflow(mut self) -> Self {
        if !self.overflowed {
            self.overflowed = self.data.iter().any(|v| !v.is_finite());
        }
        self
    }

    /// `self + alpha * other`, the perturbation step of the finite-difference
    /// probes.
    pub fn add_scaled(&self, other: &Tensor<T>, alpha: f64) -> Result<Tensor<T>, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeDiffers(self.shape, other.shape));
        }
        if self.overflowed || other.overflowed {
            return Ok(Tensor::flagged(self.shape));
        }
        let a = T::from_f64(alpha);
        let data = self.data.iter().zip(&other.data).map(|(&x, &e)| x + a * e).collect();
        Ok(Tensor { shape: self.shape, data, overflowed: false }.rescan_overflow())
    }

    /// Elementwise difference, used for `|f(x) - f(x + a e)|`.
    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, factor: f64) -> Tensor<T> {
        if self.overflowed {
            return Tensor::flagged(self.shape);
        }
        let f = T::from_f64(factor);
        let data = self.data.iter().map(|&x| x * f).collect();
        Tensor { shape: self.shape, data, overflowed: false }.rescan_overflow()
    }

    /// Elementwise `max(x, 0)`; shape preserved, overflow flag preserved.
    pub fn relu(&self) -> Tensor<T> {
        let zero = T::zero();
        let data = self.data.iter().map(|&x| if x > zero { x } else { zero }).collect();
        Tensor { shape: self.shape, data, overflowed: self.overflowed }
    }

    /// Global average pooling to `(b, c, 1, 1)`.
    pub fn gap(&self) -> Tensor<T> {
        let s = self.shape;
        let plane = s.h * s.w;
        let mut data = Vec::with_capacity(s.b * s.c);
        for bc in 0..s.b * s.c {
            let start = bc * plane;
            let sum: f64 = self.data[start..start + plane].iter().map(|v| v.to_f64()).sum();
            data.push(T::from_f64(sum / plane as f64));
        }
        Tensor { shape: Shape::new(s.b, s.c, 1, 1), data, overflowed: self.overflowed }.rescan_overflow()
    }

    /// Max pooling with same-padding, output `ceil(h/stride)`; used for the
    /// stem pool of ResNet-style architectures (k=3, stride=2).
    pub fn max_pool(&self, k: usize, stride: usize) -> Tensor<T> {
        let s = self.shape;
        let pad = (k - 1) / 2;
        let out_h = (s.h + 2 * pad - k) / stride + 1;
        let out_w = (s.w + 2 * pad - k) / stride + 1;
        let out_shape = Shape::new(s.b, s.c, out_h, out_w);
        if self.overflowed {
            return Tensor::flagged(out_shape);
        }
        let mut data = Vec::with_capacity(out_shape.numel());
        for bc in 0..s.b * s.c {
            let plane = &self.data[bc * s.h * s.w..(bc + 1) * s.h * s.w];
            for oh in 0..out_h {
                for ow in 0..out_w {
                    let mut best: Option<T> = None;
                    for kh in 0..k {
                        let ih = (oh * stride + kh) as isize - pad as isize;
                        if ih < 0 || ih >= s.h as isize {
                            continue;
                        }
                        for kw in 0..k {
                            let iw = (ow * stride + kw) as isize - pad as isize;
                            if iw < 0 || iw >= s.w as isize {
                                continue;
                            }
                            let v = plane[ih as usize * s.w + iw as usize];
                            best = Some(match best {
                                Some(b) if b > v => b,
                                _ => v,
                            });
                        }
                    }
                    data.push(best.unwrap_or_else(T::zero));
                }
            }
        }
        Tensor { shape: out_shape, data, overflowed: false }
    }

    /// Frobenius norm `sqrt(sum x^2)`, accumulated in double precision.
    pub fn frobenius_norm(&self) -> Norm {
        if self.overflowed {
            return Norm::Overflow;
        }
        let mut acc = 0.0f64;
        for v in &self.data {
            if !v.is_finite() {
                return Norm::Overflow;
            }
            let x = v.to_f64();
            acc += x * x;
        }
        if acc.is_finite() {
            Norm::Value(acc.sqrt())
        } else {
            Norm::Overflow
        }
    }

    /// Root mean square of all entries.
    pub fn rms(&self) -> Norm {
        match self.frobenius_norm() {
            Norm::Value(n) => Norm::Value(n / (self.shape.numel() as f64).sqrt()),
            Norm::Overflow => Norm::Overflow,
        }
    }
}

/// Convolution weights of shape `(c_out, c_in/groups, k, k)`.
#[derive(Clone, Debug)]
pub struct ConvKernel<T: Element = f64> {
    weights: Vec<T>,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub groups: usize,
}

impl<T: Element> ConvKernel<T> {
    /// Kernel with N(0,1) weights, the initialization every proxy assumes.
    pub fn randn(c_in: usize, c_out: usize, k: usize, stride: usize, groups: usize, rng: &mut Rng) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        assert!(c_in % groups == 0 && c_out % groups == 0, "groups must divide channels");
        let normal = rand_distr::StandardNormal;
        let n = c_out * (c_in / groups) * k * k;
        let weights = (0..n).map(|_| T::from_f64(normal.sample(rng))).collect();
        ConvKernel { weights, c_in, c_out, k, stride, groups }
    }

    pub fn from_weights(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        groups: usize,
        weights: Vec<T>,
    ) -> Result<Self, TensorError> {
        let expected = c_out * (c_in / groups) * k * k;
        if c_in % groups != 0 || c_out % groups != 0 {
            return Err(TensorError::BadGrouping { c_out, groups });
        }
        if weights.len() != expected {
            return Err(TensorError::ShapeMismatch {
                shape: Shape::new(c_out, c_in / groups, k, k),
                len: weights.len(),
                expected,
            });
        }
        Ok(ConvKernel { weights, c_in, c_out, k, stride, groups })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn out_spatial(&self, h: usize, w: usize) -> (usize, usize) {
        let pad = (self.k - 1) / 2;
        ((h + 2 * pad - self.k) / self.stride + 1, (w + 2 * pad - self.k) / self.stride + 1)
    }
}

/// One output plane `(b, co)` of the convolution. Accumulation order over
/// `(ci, kh, kw)` is fixed, so results are bit-identical no matter how planes
/// are scheduled across threads.
fn conv_plane<T: Element>(
    input: &Tensor<T>,
    kernel: &ConvKernel<T>,
    b: usize,
    co: usize,
    out_h: usize,
    out_w: usize,
    out_plane: &mut [T],
) {
    let s = input.shape();
    let k = kernel.k;
    let stride = kernel.stride;
    let pad = (k - 1) / 2;
    let cin_per_group = kernel.c_in / kernel.groups;
    let cout_per_group = kernel.c_out / kernel.groups;
    let group = co / cout_per_group;
    let in_data = input.data();

    for ci_local in 0..cin_per_group {
        let ci = group * cin_per_group + ci_local;
        let in_plane = &in_data[(b * s.c + ci) * s.h * s.w..(b * s.c + ci + 1) * s.h * s.w];
        let w_base = (co * cin_per_group + ci_local) * k * k;

        if k == 1 && stride == 1 {
            let wgt = kernel.weights[w_base];
            for (o, &x) in out_plane.iter_mut().zip(in_plane.iter()) {
                *o += wgt * x;
            }
            continue;
        }

        for kh in 0..k {
            for kw in 0..k {
                let wgt = kernel.weights[w_base + kh * k + kw];
                // iw = ow*stride + kw - pad must lie in [0, w)
                let ow_start = if kw >= pad { 0 } else { (pad - kw).div_ceil(stride) };
                let ow_end = {
                    let max_num = s.w as isize - 1 + pad as isize - kw as isize;
                    if max_num < 0 {
                        continue;
                    }
                    ((max_num as usize) / stride).min(out_w.saturating_sub(1))
                };
                if ow_start > ow_end {
                    continue;
                }
                let iw_start = ow_start * stride + kw - pad;
                let span = ow_end - ow_start + 1;
                for oh in 0..out_h {
                    let ih = (oh * stride + kh) as isize - pad as isize;
                    if ih < 0 || ih >= s.h as isize {
                        continue;
                    }
                    let in_row = &in_plane[ih as usize * s.w..(ih as usize + 1) * s.w];
                    let dst = &mut out_plane[oh * out_w + ow_start..oh * out_w + ow_start + span];
                    if stride == 1 {
                        let src = &in_row[iw_start..iw_start + span];
                        for (o, &x) in dst.iter_mut().zip(src) {
                            *o += wgt * x;
                        }
                    } else {
                        let src = in_row[iw_start..].iter().step_by(stride);
                        for (o, &x) in dst.iter_mut().zip(src) {
                            *o += wgt * x;
                        }
                    }
                }
            }
        }
    }
}

fn conv2d_checked<T: Element>(
    input: &Tensor<T>,
    kernel: &ConvKernel<T>,
) -> Result<(Shape, usize, usize), TensorError> {
    let s = input.shape();
    if s.c != kernel.c_in {
        return Err(TensorError::ChannelMismatch { input: s.c, expected: kernel.c_in });
    }
    let (out_h, out_w) = kernel.out_spatial(s.h, s.w);
    Ok((Shape::new(s.b, kernel.c_out, out_h, out_w), out_h, out_w))
}

/// Direct convolution, sequential over output planes.
pub fn conv2d_serial<T: Element>(input: &Tensor<T>, kernel: &ConvKernel<T>) -> Result<Tensor<T>, TensorError> {
    let (out_shape, out_h, out_w) = conv2d_checked(input, kernel)?;
    if input.overflowed() || !kernel.finite() {
        return Ok(Tensor::flagged(out_shape));
    }
    let mut out = Tensor::zeros(out_shape);
    let plane = out_h * out_w;
    for (idx, chunk) in out.data.chunks_mut(plane).enumerate() {
        let b = idx / kernel.c_out;
        let co = idx % kernel.c_out;
        conv_plane(input, kernel, b, co, out_h, out_w, chunk);
    }
    Ok(out.rescan_overflow())
}

/// Direct convolution. With the `parallel` feature the output planes are
/// distributed over the rayon pool; the result is bit-identical to
/// [`conv2d_serial`] because every plane accumulates independently in a
/// fixed order.
pub fn conv2d<T: Element>(input: &Tensor<T>, kernel: &ConvKernel<T>) -> Result<Tensor<T>, TensorError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let (out_shape, out_h, out_w) = conv2d_checked(input, kernel)?;
        if input.overflowed() || !kernel.finite() {
            return Ok(Tensor::flagged(out_shape));
        }
        let mut out = Tensor::zeros(out_shape);
        let plane = out_h * out_w;
        out.data.par_chunks_mut(plane).enumerate().for_each(|(idx, chunk)| {
            let b = idx / kernel.c_out;
            let co = idx % kernel.c_out;
            conv_plane(input, kernel, b, co, out_h, out_w, chunk);
        });
        Ok(out.rescan_overflow())
    }
    #[cfg(not(feature = "parallel"))]
    {
        conv2d_serial(input, kernel)
    }
}

/// Which statistic the batch-norm step uses.
///
/// `NoMean` is the modified form used inside the Zen-Score: the per-channel
/// statistic is the root mean square with no mean subtraction. `Standard`
/// estimates sigma as the usual standard deviation after subtracting the
/// channel mean. In both modes the output is the input divided by the
/// per-channel sigma; only the estimator differs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnMode {
    NoMean,
    Standard,
}

/// Per-layer batch-norm statistics.
#[derive(Clone, Debug)]
pub struct BnStats {
    /// Unclamped per-channel sigma (>= 0).
    pub per_channel_sigma: Vec<f64>,
    /// Arithmetic mean of the per-channel sigma^2.
    pub mean_sigma_sq: f64,
    pub mode: BnMode,
    /// Channels whose sigma collapsed to zero and were clamped.
    pub degenerate: Vec<bool>,
}

impl BnStats {
    /// `sigma_bar = sqrt(mean_j sigma_j^2)`, the layer statistic the
    /// Zen-Score sums in log domain.
    pub fn sigma_bar(&self) -> f64 {
        self.mean_sigma_sq.sqrt()
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|d| **d).count()
    }
}

/// Normalize each channel by its mini-batch sigma.
///
/// Statistics are accumulated in double precision regardless of the tensor
/// element type. Zero-sigma channels are clamped to [`BN_SIGMA_EPSILON`] and
/// flagged rather than erroring, since width-starved layers under ReLU do go
/// fully dead during long searches.
pub fn bn_forward<T: Element>(input: &Tensor<T>, mode: BnMode) -> Result<(Tensor<T>, BnStats), TensorError> {
    let s = input.shape();
    let n = s.b * s.h * s.w;
    if n < 2 {
        return Err(TensorError::BnTooFewSamples(n));
    }
    if input.overflowed() {
        return Err(TensorError::BnNonFiniteInput);
    }

    let plane = s.h * s.w;
    let mut sum = vec![0.0f64; s.c];
    let mut sum_sq = vec![0.0f64; s.c];
    for b in 0..s.b {
        for c in 0..s.c {
            let start = (b * s.c + c) * plane;
            for v in &input.data[start..start + plane] {
                let x = v.to_f64();
                if !x.is_finite() {
                    return Err(TensorError::BnNonFiniteInput);
                }
                sum[c] += x;
                sum_sq[c] += x * x;
            }
        }
    }

    let mut per_channel_sigma = Vec::with_capacity(s.c);
    let mut degenerate = vec![false; s.c];
    for c in 0..s.c {
        let var = match mode {
            BnMode::NoMean => sum_sq[c] / n as f64,
            BnMode::Standard => {
                let mean = sum[c] / n as f64;
                (sum_sq[c] / n as f64 - mean * mean).max(0.0)
            }
        };
        per_channel_sigma.push(var.sqrt());
    }
    let mean_sigma_sq = per_channel_sigma.iter().map(|s| s * s).sum::<f64>() / s.c as f64;

    let mut out = Tensor::zeros(s);
    for b in 0..s.b {
        for c in 0..s.c {
            let sigma = per_channel_sigma[c];
            let sigma = if sigma <= 0.0 {
                degenerate[c] = true;
                BN_SIGMA_EPSILON
            } else {
                sigma
            };
            let inv = T::from_f64(1.0 / sigma);
            let start = (b * s.c + c) * plane;
            for (o, &x) in out.data[start..start + plane].iter_mut().zip(&input.data[start..start + plane]) {
                *o = x * inv;
            }
        }
    }

    Ok((out.rescan_overflow(), BnStats { per_channel_sigma, mean_sigma_sq, mode, degenerate }))
}
