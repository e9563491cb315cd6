//! Bilinear ×2 upsampling and its exact adjoint.
//!
//! Source coordinates follow the half-pixel convention
//! `src = (dst + 0.5)/2 − 0.5`, clamped to the image, so corner pixels are
//! *not* pinned (align-corners = false). Per-axis index/weight tables are
//! precomputed once; the backward pass scatters with the same tables, making
//! it the exact transpose of the forward map.

use super::{Scalar, Tensor};
use crate::error::{FsgError, FsgResult};

/// For each destination coordinate along one axis: the two source indices
/// and the weight of the second one (first gets `1 − w`).
fn axis_table<S: Scalar>(src_len: usize, dst_len: usize) -> Vec<(usize, usize, S)> {
    let mut table = Vec::with_capacity(dst_len);
    for d in 0..dst_len {
        let s = (d as f64 + 0.5) / 2.0 - 0.5;
        let s = s.max(0.0);
        let i0 = (s.floor() as usize).min(src_len - 1);
        let i1 = (i0 + 1).min(src_len - 1);
        let frac = if i1 > i0 { s - i0 as f64 } else { 0.0 };
        table.push((i0, i1, S::from_f64(frac)));
    }
    table
}

/// Doubles both spatial axes with bilinear interpolation.
pub fn upsample_bilinear<S: Scalar>(input: &Tensor<S>) -> FsgResult<Tensor<S>> {
    let [n, c, h, w] = input.shape();
    if h == 0 || w == 0 {
        return Err(FsgError::dim_ctx("spatial size", "≥ 1", format!("{h}×{w}"), "upsampling"));
    }
    let (ho, wo) = (2 * h, 2 * w);
    let ty = axis_table::<S>(h, ho);
    let tx = axis_table::<S>(w, wo);
    let one = S::one();
    let mut out = Tensor::zeros([n, c, ho, wo]);
    for ni in 0..n {
        for ci in 0..c {
            let src = input.plane(ni, ci);
            let base = (ni * c + ci) * ho * wo;
            let dst = &mut out.data_mut()[base..base + ho * wo];
            for (y, &(y0, y1, fy)) in ty.iter().enumerate() {
                let r0 = &src[y0 * w..y0 * w + w];
                let r1 = &src[y1 * w..y1 * w + w];
                let drow = &mut dst[y * wo..y * wo + wo];
                for (x, &(x0, x1, fx)) in tx.iter().enumerate() {
                    let top = r0[x0] * (one - fx) + r0[x1] * fx;
                    let bot = r1[x0] * (one - fx) + r1[x1] * fx;
                    drow[x] = top * (one - fy) + bot * fy;
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`upsample_bilinear`]: scatters each upstream pixel onto its
/// four source taps with the forward weights.
pub fn upsample_bilinear_backward<S: Scalar>(
    src_shape: [usize; 4],
    grad_out: &Tensor<S>,
) -> FsgResult<Tensor<S>> {
    let [n, c, h, w] = src_shape;
    let expect = [n, c, 2 * h, 2 * w];
    if grad_out.shape() != expect {
        return Err(FsgError::dim_ctx(
            "grad shape",
            format!("{expect:?}"),
            format!("{:?}", grad_out.shape()),
            "upstream gradient vs upsampled output",
        ));
    }
    let (ho, wo) = (2 * h, 2 * w);
    let ty = axis_table::<S>(h, ho);
    let tx = axis_table::<S>(w, wo);
    let one = S::one();
    let mut dinput = Tensor::zeros(src_shape);
    for ni in 0..n {
        for ci in 0..c {
            let g = grad_out.plane(ni, ci);
            let base = (ni * c + ci) * h * w;
            let dst = &mut dinput.data_mut()[base..base + h * w];
            for (y, &(y0, y1, fy)) in ty.iter().enumerate() {
                let grow = &g[y * wo..y * wo + wo];
                for (x, &(x0, x1, fx)) in tx.iter().enumerate() {
                    let v = grow[x];
                    dst[y0 * w + x0] += v * (one - fy) * (one - fx);
                    dst[y0 * w + x1] += v * (one - fy) * fx;
                    dst[y1 * w + x0] += v * fy * (one - fx);
                    dst[y1 * w + x1] += v * fy * fx;
                }
            }
        }
    }
    Ok(dinput)
}
