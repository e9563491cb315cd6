//! Independent reference implementations ("oracles") and harnesses shared by
//! the integration tests.
//!
//! Everything here is written directly from the mathematical definition of
//! the operation it checks, sharing no code with the library paths under
//! test — nested loops, no tiling, no padding buffers, no recursion tricks.
//! Slow and obviously correct is the point.

#![allow(dead_code)]

use fsg::tensor::{Scalar, Tensor};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform tensor in [−scale, scale].
pub fn rand_tensor<S: Scalar>(rng: &mut ChaCha8Rng, shape: [usize; 4], scale: f64) -> Tensor<S> {
    Tensor::from_fn(shape, |_| S::from_f64(rng.gen_range(-scale..scale)))
}

/// Plain cross-correlation straight from the definition:
/// `out[n,co,y,x] = bias[co] + Σ_{ci,ky,kx} k[co,ci,ky,kx] ·
/// in[n,ci,y·s+ky·d−p, x·s+kx·d−p]`, zero outside bounds.
pub fn oracle_conv2d(
    input: &Tensor<f64>,
    kernel: &Tensor<f64>,
    bias: &[f64],
    stride: usize,
    padding: usize,
    dilation: usize,
) -> Tensor<f64> {
    let [n, ci, h, w] = input.shape();
    let [co, kci, kh, kw] = kernel.shape();
    assert_eq!(ci, kci);
    let span_h = dilation * (kh - 1) + 1;
    let span_w = dilation * (kw - 1) + 1;
    let ho = (h + 2 * padding - span_h) / stride + 1;
    let wo = (w + 2 * padding - span_w) / stride + 1;
    let mut out = Tensor::zeros([n, co, ho, wo]);
    for ni in 0..n {
        for c in 0..co {
            for y in 0..ho {
                for x in 0..wo {
                    let mut acc = bias[c];
                    for cc in 0..ci {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (y * stride + ky * dilation) as isize - padding as isize;
                                let ix = (x * stride + kx * dilation) as isize - padding as isize;
                                if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w {
                                    acc += kernel.at(c, cc, ky, kx)
                                        * input.at(ni, cc, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    *out.at_mut(ni, c, y, x) = acc;
                }
            }
        }
    }
    out
}

/// Largest elementwise |a − b| between two equal-shaped tensors.
pub fn max_abs_diff<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "comparing different shapes");
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (Scalar::to_f64(x) - Scalar::to_f64(y)).abs())
        .fold(0.0, f64::max)
}

/// Central-difference gradient of a scalar-valued function w.r.t. one tensor
/// argument. O(len) function evaluations — keep the tensors tiny.
pub fn central_diff_grad(
    x: &Tensor<f64>,
    h: f64,
    mut f: impl FnMut(&Tensor<f64>) -> f64,
) -> Tensor<f64> {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - h;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Worst-case relative disagreement between analytic and numeric gradients:
/// `max_i |a_i − n_i| / max(1, |a_i|, |n_i|)`.
pub fn max_rel_err(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / 1.0f64.max(a.abs()).max(n.abs()))
        .fold(0.0, f64::max)
}

/// Same relative-error reduction for flat slices (bias gradients).
pub fn max_rel_err_slice(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / 1.0f64.max(a.abs()).max(n.abs()))
        .fold(0.0, f64::max)
}

/// Inner product ⟨a, w⟩ used to turn a tensor-valued op into a scalar loss
/// with a known upstream gradient (the weights themselves).
pub fn weighted_sum(a: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    assert_eq!(a.shape(), w.shape());
    a.data().iter().zip(w.data()).map(|(x, y)| x * y).sum()
}

/// 2×2/stride-2 max pooling from the definition, one window at a time.
pub fn oracle_max_pool2(input: &Tensor<f64>) -> Tensor<f64> {
    let [n, c, h, w] = input.shape();
    let mut out = Tensor::zeros([n, c, h / 2, w / 2]);
    for ni in 0..n {
        for ci in 0..c {
            for y in 0..h / 2 {
                for x in 0..w / 2 {
                    let mut m = f64::NEG_INFINITY;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            m = m.max(input.at(ni, ci, 2 * y + dy, 2 * x + dx));
                        }
                    }
                    *out.at_mut(ni, ci, y, x) = m;
                }
            }
        }
    }
    out
}

/// Scalar Adam recurrence straight from the update equations, tracking one
/// parameter through a gradient sequence.
pub fn oracle_adam_scalar(
    theta0: f64,
    grads: &[f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> f64 {
    let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
    for (t, &g) in grads.iter().enumerate() {
        let t = (t + 1) as i32;
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        let mhat = m / (1.0 - beta1.powi(t));
        let vhat = v / (1.0 - beta2.powi(t));
        theta -= lr * mhat / (vhat.sqrt() + eps);
    }
    theta
}
