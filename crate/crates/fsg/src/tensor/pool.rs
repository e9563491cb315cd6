//! 2×2 max pooling (stride 2) and its gradient.
//!
//! Ties inside a window route the gradient to the first maximal element in
//! row-major window order, so backward is deterministic even on plateaus.
//! The backward pass rescans the forward input for the argmax instead of
//! storing indices; pooling is a vanishing fraction of network time and the
//! rescan keeps the forward signature free of bookkeeping.

use super::{Scalar, Tensor};
use crate::error::{FsgError, FsgResult};

/// Halves both spatial axes by taking per-window maxima. Requires even
/// height and width.
pub fn max_pool2<S: Scalar>(input: &Tensor<S>) -> FsgResult<Tensor<S>> {
    let [n, c, h, w] = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(FsgError::dim_ctx(
            "spatial size",
            "even",
            format!("{h}×{w}"),
            "2×2 pooling halves each axis exactly",
        ));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros([n, c, ho, wo]);
    for ni in 0..n {
        for ci in 0..c {
            let src = input.plane(ni, ci);
            let base = (ni * c + ci) * ho * wo;
            let dst = &mut out.data_mut()[base..base + ho * wo];
            for y in 0..ho {
                let r0 = &src[2 * y * w..2 * y * w + w];
                let r1 = &src[(2 * y + 1) * w..(2 * y + 1) * w + w];
                for x in 0..wo {
                    let m = r0[2 * x]
                        .max(r0[2 * x + 1])
                        .max(r1[2 * x])
                        .max(r1[2 * x + 1]);
                    dst[y * wo + x] = m;
                }
            }
        }
    }
    Ok(out)
}

/// Routes `grad_out` back to each window's first maximal input element.
pub fn max_pool2_backward<S: Scalar>(
    input: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> FsgResult<Tensor<S>> {
    let [n, c, h, w] = input.shape();
    let expect = [n, c, h / 2, w / 2];
    if grad_out.shape() != expect {
        return Err(FsgError::dim_ctx(
            "grad shape",
            format!("{expect:?}"),
            format!("{:?}", grad_out.shape()),
            "upstream gradient vs pooled output",
        ));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut dinput = Tensor::zeros([n, c, h, w]);
    for ni in 0..n {
        for ci in 0..c {
            let src = input.plane(ni, ci);
            let g = grad_out.plane(ni, ci);
            let base = (ni * c + ci) * h * w;
            let dst = &mut dinput.data_mut()[base..base + h * w];
            for y in 0..ho {
                for x in 0..wo {
                    // window in row-major order; strict `>` keeps the first max
                    let idx = [
                        2 * y * w + 2 * x,
                        2 * y * w + 2 * x + 1,
                        (2 * y + 1) * w + 2 * x,
                        (2 * y + 1) * w + 2 * x + 1,
                    ];
                    let mut best = idx[0];
                    for &i in &idx[1..] {
                        if src[i] > src[best] {
                            best = i;
                        }
                    }
                    dst[best] += g[y * wo + x];
                }
            }
        }
    }
    Ok(dinput)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_window_maxima() {
        let input = Tensor::new(
            [1, 1, 4, 4],
            vec![
                1.0, 2.0, 0.0, 0.0, //
                3.0, 4.0, 0.0, 5.0, //
                -1.0, -2.0, 9.0, 8.0, //
                -3.0, -4.0, 7.0, 6.0,
            ],
        )
        .unwrap();
        let out = max_pool2(&input).unwrap();
        assert_eq!(out.shape(), [1, 1, 2, 2]);
        assert_eq!(out.data(), &[4.0, 5.0, -1.0, 9.0]);
    }

    #[test]
    fn backward_routes_to_first_max_on_ties() {
        let input = Tensor::full([1, 1, 2, 2], 7.0f32);
        let grad = Tensor::full([1, 1, 1, 1], 1.5f32);
        let d = max_pool2_backward(&input, &grad).unwrap();
        assert_eq!(d.data(), &[1.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn odd_size_is_rejected() {
        let input = Tensor::<f32>::zeros([1, 1, 3, 4]);
        assert!(max_pool2(&input).is_err());
    }
}
