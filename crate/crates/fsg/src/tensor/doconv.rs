//! Depthwise over-parameterization of convolution kernels.
//!
//! Every spatial convolution trains an extra per-input-channel matrix `D`
//! (shape K²×K², identity at init) alongside its kernel `W`. Before each
//! forward pass the pair is folded into an ordinary kernel
//! `E[co,ci,j] = Σ_i D[ci][j,i] · W[co,ci,i]` (j, i index the flattened K²
//! taps), so inference cost is unchanged while training gets the extra
//! degrees of freedom. Gradients flow through the fold:
//! `∂L/∂W = Dᵀ·∂L/∂E` and `∂L/∂D[ci][j,i] = Σ_co ∂L/∂E[co,ci,j]·W[co,ci,i]`.
//!
//! `D` tensors are stored as (Ci, 1, K², K²) so the parameter registry can
//! treat them like any other 4-axis tensor.

use super::{Scalar, Tensor};
use crate::error::{FsgError, FsgResult};

/// Identity over-parameterization: folding with it returns `W` unchanged.
pub fn doconv_identity<S: Scalar>(ci: usize, kernel_size: usize) -> Tensor<S> {
    let kk = kernel_size * kernel_size;
    let mut d = Tensor::zeros([ci, 1, kk, kk]);
    for c in 0..ci {
        for j in 0..kk {
            *d.at_mut(c, 0, j, j) = S::one();
        }
    }
    d
}

fn check_pair<S: Scalar>(w: &Tensor<S>, d: &Tensor<S>) -> FsgResult<(usize, usize, usize, usize)> {
    let [co, ci, kh, kw] = w.shape();
    if kh != kw {
        return Err(FsgError::dim_ctx("kernel size", kh, kw, "square kernels only"));
    }
    let kk = kh * kw;
    if d.shape() != [ci, 1, kk, kk] {
        return Err(FsgError::dim_ctx(
            "over-parameterization shape",
            format!("[{ci}, 1, {kk}, {kk}]"),
            format!("{:?}", d.shape()),
            "one K²×K² matrix per input channel",
        ));
    }
    Ok((co, ci, kh, kk))
}

/// Folds (W, D) into the effective kernel actually convolved with.
pub fn doconv_fold<S: Scalar>(w: &Tensor<S>, d: &Tensor<S>) -> FsgResult<Tensor<S>> {
    let (co, ci, k, kk) = check_pair(w, d)?;
    let mut e = Tensor::zeros([co, ci, k, k]);
    for c in 0..co {
        for cc in 0..ci {
            let wf = &w.data()[(c * ci + cc) * kk..(c * ci + cc + 1) * kk];
            let df = &d.data()[cc * kk * kk..(cc + 1) * kk * kk];
            let ef = &mut e.data_mut()[(c * ci + cc) * kk..(c * ci + cc + 1) * kk];
            for j in 0..kk {
                let row = &df[j * kk..(j + 1) * kk];
                let mut acc = S::zero();
                for i in 0..kk {
                    acc = row[i].mul_add(wf[i], acc);
                }
                ef[j] = acc;
            }
        }
    }
    e.ensure_finite("doconv_fold")?;
    Ok(e)
}

/// Pulls a gradient w.r.t. the folded kernel back onto (W, D).
pub fn doconv_fold_backward<S: Scalar>(
    w: &Tensor<S>,
    d: &Tensor<S>,
    grad_folded: &Tensor<S>,
) -> FsgResult<(Tensor<S>, Tensor<S>)> {
    let (co, ci, _k, kk) = check_pair(w, d)?;
    if grad_folded.shape() != w.shape() {
        return Err(FsgError::dim_ctx(
            "grad shape",
            format!("{:?}", w.shape()),
            format!("{:?}", grad_folded.shape()),
            "upstream gradient vs folded kernel",
        ));
    }
    let mut dw = Tensor::zeros(w.shape());
    let mut dd = Tensor::zeros(d.shape());
    for c in 0..co {
        for cc in 0..ci {
            let wf = &w.data()[(c * ci + cc) * kk..(c * ci + cc + 1) * kk];
            let gf = &grad_folded.data()[(c * ci + cc) * kk..(c * ci + cc + 1) * kk];
            let df = &d.data()[cc * kk * kk..(cc + 1) * kk * kk];
            // ∂L/∂W[i] += Σ_j D[j,i]·g[j]
            let dwf = &mut dw.data_mut()[(c * ci + cc) * kk..(c * ci + cc + 1) * kk];
            for j in 0..kk {
                let row = &df[j * kk..(j + 1) * kk];
                let gj = gf[j];
                for i in 0..kk {
                    dwf[i] = gj.mul_add(row[i], dwf[i]);
                }
            }
            // ∂L/∂D[j,i] += g[j]·W[i]
            let ddf = &mut dd.data_mut()[cc * kk * kk..(cc + 1) * kk * kk];
            for j in 0..kk {
                let gj = gf[j];
                let drow = &mut ddf[j * kk..(j + 1) * kk];
                for i in 0..kk {
                    drow[i] = gj.mul_add(wf[i], drow[i]);
                }
            }
        }
    }
    dw.ensure_finite("doconv_fold_backward (kernel grad)")?;
    dd.ensure_finite("doconv_fold_backward (over-param grad)")?;
    Ok((dw, dd))
}
