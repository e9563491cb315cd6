//! Adam parameter updates over a flat list of tensors.
//!
//! Classic bias-corrected form: first/second moment EMAs per element,
//! `θ ← θ − lr · m̂ / (√v̂ + ε)` with ε added *outside* the square root.
//! State is keyed by position in the parameter list, matching the network's
//! parameter registry, so checkpointing and stepping share one layout.

use super::{Scalar, Tensor};
use crate::error::{FsgError, FsgResult};

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter list; `t` counts completed steps.
#[derive(Debug, Clone)]
pub struct AdamState<S: Scalar = f32> {
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
    t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &[Tensor<S>]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One optimizer step over every parameter; `grads` must align one-to-one
/// with `params` in order and shape.
pub fn adam_step<S: Scalar>(
    params: &mut [Tensor<S>],
    grads: &[Tensor<S>],
    state: &mut AdamState<S>,
    hyper: &AdamHyper,
) -> FsgResult<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(FsgError::dim_ctx(
            "parameter count",
            params.len(),
            grads.len().max(state.m.len()),
            "params, grads, and optimizer state must align",
        ));
    }
    state.t += 1;
    let b1 = S::from_f64(hyper.beta1);
    let b2 = S::from_f64(hyper.beta2);
    let one = S::one();
    let eps = S::from_f64(hyper.eps);
    let bc1 = S::from_f64(1.0 - hyper.beta1.powi(state.t as i32));
    let bc2 = S::from_f64(1.0 - hyper.beta2.powi(state.t as i32));
    let lr = S::from_f64(hyper.lr);
    for (i, p) in params.iter_mut().enumerate() {
        let g = &grads[i];
        if g.shape() != p.shape() {
            return Err(FsgError::dim_ctx(
                "grad shape",
                format!("{:?}", p.shape()),
                format!("{:?}", g.shape()),
                format!("parameter {i}"),
            ));
        }
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let pd = p.data_mut();
        for ((pv, gv), (mv, vv)) in pd.iter_mut().zip(g.data()).zip(m.iter_mut().zip(v.iter_mut()))
        {
            let g = *gv;
            *mv = b1 * *mv + (one - b1) * g;
            *vv = b2 * *vv + (one - b2) * g * g;
            let mhat = *mv / bc1;
            let vhat = *vv / bc2;
            *pv -= lr * mhat / (vhat.sqrt() + eps);
        }
        p.ensure_finite("adam_step")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_for_unit_gradient() {
        // With g constant, m̂ = g and v̂ = g² at every t, so each step is
        // −lr·g/(|g| + ε): the classic property that step size ≈ lr.
        let mut params = vec![Tensor::full([1, 1, 1, 2], 1.0f64)];
        let grads = vec![Tensor::new([1, 1, 1, 2], vec![1.0, -1.0]).unwrap()];
        let mut state = AdamState::new(&params);
        let hyper = AdamHyper::default();
        adam_step(&mut params, &grads, &mut state, &hyper).unwrap();
        let expect = 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((params[0].data()[0] - expect).abs() < 1e-12);
        assert!((params[0].data()[1] - (2.0 - expect)).abs() < 1e-12);
        assert_eq!(state.steps(), 1);
    }

    #[test]
    fn mismatched_grad_list_is_rejected() {
        let mut params = vec![Tensor::<f32>::zeros([1, 1, 1, 1])];
        let grads: Vec<Tensor<f32>> = vec![];
        let mut state = AdamState::new(&params);
        assert!(adam_step(&mut params, &grads, &mut state, &AdamHyper::default()).is_err());
    }
}
