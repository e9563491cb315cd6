//! Minimal differentiable-operator engine.
//!
//! Everything the grasp network needs and nothing more: a dense NCHW tensor,
//! convolution (standard / dilated / depthwise-over-parameterized), 2×2 max
//! pooling, bilinear upsampling, ReLU, pixel-wise MSE, and Adam. There is no
//! autodiff tape — the network's backward pass is written by hand — so every
//! operator here exposes an explicit companion gradient routine.
//!
//! All operators are generic over the scalar type: `f32` is the production
//! dtype, `f64` exists solely so gradient-check tests can compare analytic
//! gradients against central finite differences without drowning in rounding
//! error. Both dtypes run the exact same code path.
//!
//! Operators are pure and deterministic: identical inputs produce
//! bit-identical outputs (fixed loop and reduction order, no threading).

pub mod adam;
pub mod conv;
pub mod doconv;
pub mod pool;
pub mod upsample;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use conv::{conv2d, conv2d_backward, ConvSpec};
pub use doconv::{doconv_fold, doconv_fold_backward, doconv_identity};
pub use pool::{max_pool2, max_pool2_backward};
pub use upsample::{upsample_bilinear, upsample_bilinear_backward};

use crate::error::{FsgError, FsgResult};

/// Width of the fixed-size lane groups the convolution kernels accumulate in.
pub const LANES: usize = 8;

/// Scalar dtype bound: the engine runs on `f32` in production and `f64` in
/// gradient-check mode, through one shared implementation.
pub trait Scalar:
    num_traits::Float
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::iter::Sum
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Elementwise fused multiply–add over one lane group:
    /// `acc[l] += a[l] * b[l]` for every lane.
    ///
    /// The default is a plain loop; `f32` overrides it with an explicit
    /// 256-bit FMA so the hot gradient kernel does not depend on the
    /// auto-vectorizer, which gives up on this pattern when the surrounding
    /// trip counts are only known at run time.
    #[inline(always)]
    fn fma_lanes(a: &[Self; LANES], b: &[Self; LANES], acc: &mut [Self; LANES]) {
        for l in 0..LANES {
            acc[l] = a[l].mul_add(b[l], acc[l]);
        }
    }
}

impl Scalar for f32 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[cfg(all(target_arch = "x86_64", target_feature = "fma"))]
    #[inline(always)]
    fn fma_lanes(a: &[f32; LANES], b: &[f32; LANES], acc: &mut [f32; LANES]) {
        use std::arch::x86_64::{_mm256_fmadd_ps, _mm256_loadu_ps, _mm256_storeu_ps};
        // SAFETY: the `fma` target feature is statically enabled (cfg above),
        // and all three pointers come from `[f32; 8]` references, so each
        // unaligned 8-lane load/store stays in bounds.
        unsafe {
            let va = _mm256_loadu_ps(a.as_ptr());
            let vb = _mm256_loadu_ps(b.as_ptr());
            let vc = _mm256_loadu_ps(acc.as_ptr());
            _mm256_storeu_ps(acc.as_mut_ptr(), _mm256_fmadd_ps(va, vb, vc));
        }
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dense 4-D array in NCHW (batch, channels, height, width) row-major layout.
///
/// Invariants: `data.len() == n*c*h*w` always (enforced at construction), and
/// every forward/backward operator verifies its output is finite before
/// returning — NaN/Inf anywhere is an error state, never silently propagated.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S = f32> {
    shape: [usize; 4],
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Builds a tensor from explicit data; fails if the length disagrees
    /// with the shape product.
    pub fn new(shape: [usize; 4], data: Vec<S>) -> FsgResult<Self> {
        let need: usize = shape.iter().product();
        if data.len() != need {
            return Err(FsgError::dim_ctx(
                "data length",
                need,
                data.len(),
                format!("shape {shape:?}"),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![S::zero(); len],
        }
    }

    pub fn full(shape: [usize; 4], value: S) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; len],
        }
    }

    /// Fills from a function of the flat index (used by tests and seeding).
    pub fn from_fn(shape: [usize; 4], f: impl FnMut(usize) -> S) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: (0..len).map(f).collect(),
        }
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }
    #[inline]
    pub fn n(&self) -> usize {
        self.shape[0]
    }
    #[inline]
    pub fn c(&self) -> usize {
        self.shape[1]
    }
    #[inline]
    pub fn h(&self) -> usize {
        self.shape[2]
    }
    #[inline]
    pub fn w(&self) -> usize {
        self.shape[3]
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> S {
        debug_assert!(n < self.shape[0] && c < self.shape[1] && y < self.shape[2] && x < self.shape[3]);
        self.data[((n * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut S {
        debug_assert!(n < self.shape[0] && c < self.shape[1] && y < self.shape[2] && x < self.shape[3]);
        &mut self.data[((n * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x]
    }

    /// One contiguous H×W plane.
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[S] {
        let hw = self.shape[2] * self.shape[3];
        let base = (n * self.shape[1] + c) * hw;
        &self.data[base..base + hw]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [S] {
        let hw = self.shape[2] * self.shape[3];
        let base = (n * self.shape[1] + c) * hw;
        &mut self.data[base..base + hw]
    }

    /// Errors with the operator name if any element is NaN/Inf; the engine's
    /// contract is that every op output is finite.
    pub fn ensure_finite(&self, op: &'static str) -> FsgResult<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(FsgError::NonFinite { op })
        }
    }

    /// Elementwise map into a new tensor.
    pub fn map(&self, f: impl Fn(S) -> S) -> Tensor<S> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Converts dtype (f32 ↔ f64), used by gradient-check tests.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| T::from_f64(Scalar::to_f64(v))).collect(),
        }
    }
}

/// Elementwise max(0, x).
///
/// The companion gradient is the 0/1 mask of the *input*: exactly zero at
/// x == 0 (subgradient choice fixed for determinism).
pub fn relu<S: Scalar>(input: &Tensor<S>) -> FsgResult<Tensor<S>> {
    let out = input.map(|v| if v > S::zero() { v } else { S::zero() });
    out.ensure_finite("relu")?;
    Ok(out)
}

/// Routes the upstream gradient through the ReLU mask of `input`.
pub fn relu_backward<S: Scalar>(input: &Tensor<S>, grad_out: &Tensor<S>) -> FsgResult<Tensor<S>> {
    if input.shape() != grad_out.shape() {
        return Err(FsgError::dim_ctx(
            "shape",
            format!("{:?}", input.shape()),
            format!("{:?}", grad_out.shape()),
            "relu backward: input vs upstream gradient",
        ));
    }
    let data = input
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&x, &g)| if x > S::zero() { g } else { S::zero() })
        .collect();
    let out = Tensor {
        shape: input.shape,
        data,
    };
    out.ensure_finite("relu_backward")?;
    Ok(out)
}

/// Pixel-wise mean squared error over a subset of channels, with its gradient
/// w.r.t. `pred`.
///
/// `loss = mean over (batch × selected channels × pixels) of (pred − target)²`
/// and `grad = 2(pred − target)/N` on selected channels, zero elsewhere.
/// Channel masking is how the input-ablation baselines drop the height term
/// from training without changing the architecture.
pub fn mse_channels<S: Scalar>(
    pred: &Tensor<S>,
    target: &Tensor<S>,
    channels: &[usize],
) -> FsgResult<(S, Tensor<S>)> {
    if pred.shape() != target.shape() {
        return Err(FsgError::dim_ctx(
            "shape",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
            "mse: prediction vs target",
        ));
    }
    for &ch in channels {
        if ch >= pred.c() {
            return Err(FsgError::dim("channel index", pred.c() - 1, ch));
        }
    }
    let (n, _c, h, w) = (pred.n(), pred.c(), pred.h(), pred.w());
    let count = n * channels.len() * h * w;
    if count == 0 {
        return Err(FsgError::Data("MSE over an empty selection".into()));
    }
    let inv = S::from_f64(1.0 / count as f64);
    let two = S::from_f64(2.0);
    let mut grad = Tensor::zeros(pred.shape());
    let mut acc = S::zero();
    for ni in 0..n {
        for &ch in channels {
            let p = pred.plane(ni, ch);
            let t = target.plane(ni, ch);
            let g = grad.plane_mut(ni, ch);
            for i in 0..p.len() {
                let d = p[i] - t[i];
                acc += d * d;
                g[i] = two * d * inv;
            }
        }
    }
    let loss = acc * inv;
    if !loss.is_finite() {
        return Err(FsgError::NonFinite { op: "mse" });
    }
    Ok((loss, grad))
}

/// Pixel-wise MSE over all channels (the production loss for the full
/// five-map head).
pub fn mse_pixelwise<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>) -> FsgResult<(S, Tensor<S>)> {
    let all: Vec<usize> = (0..pred.c()).collect();
    mse_channels(pred, target, &all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_checks() {
        assert!(Tensor::<f32>::new([1, 2, 2, 2], vec![0.0; 8]).is_ok());
        assert!(Tensor::<f32>::new([1, 2, 2, 2], vec![0.0; 7]).is_err());
    }

    #[test]
    fn relu_clamps_negatives_and_masks_gradient() {
        let t = Tensor::new([1, 1, 1, 3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        let out = relu(&t).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);
        let g = Tensor::full([1, 1, 1, 3], 1.0f32);
        let back = relu_backward(&t, &g).unwrap();
        // gradient is zero at x == 0 by the documented subgradient choice
        assert_eq!(back.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_all_negative_zeroes_everything() {
        let t = Tensor::full([1, 2, 3, 3], -3.5f32);
        let out = relu(&t).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        let back = relu_backward(&t, &Tensor::full([1, 2, 3, 3], 1.0)).unwrap();
        assert!(back.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mse_trivial_cases() {
        let a = Tensor::full([1, 5, 4, 4], 0.25f32);
        let (loss, grad) = mse_pixelwise(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));

        let b = a.map(|v| v + 1.0);
        let (loss, _) = mse_pixelwise(&b, &a).unwrap();
        assert!((loss - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mse_shape_mismatch_is_an_error() {
        let a = Tensor::<f32>::zeros([1, 5, 4, 4]);
        let b = Tensor::<f32>::zeros([1, 5, 4, 5]);
        assert!(mse_pixelwise(&a, &b).is_err());
    }

    #[test]
    fn mse_channel_mask_ignores_unselected_channels() {
        let mut pred = Tensor::<f32>::zeros([1, 5, 2, 2]);
        let target = Tensor::<f32>::zeros([1, 5, 2, 2]);
        // garbage in channel 4 must not matter when masked out
        pred.plane_mut(0, 4).fill(100.0);
        let (loss, grad) = mse_channels(&pred, &target, &[0, 1, 2, 3]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.plane(0, 4).iter().all(|&v| v == 0.0));
    }
}
