use serde::{Deserialize, Serialize};

use super::{Result, Tensor, TensorError};

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
}

impl AdamState {
    pub fn new(shape: (usize, usize)) -> Self {
        Self {
            m: Tensor::zeros(shape.0, shape.1),
            v: Tensor::zeros(shape.0, shape.1),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(
    param: &mut Tensor,
    grad: &Tensor,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(TensorError::Shape {
            op: "adam_step",
            lhs: param.shape(),
            rhs: grad.shape(),
        });
    }
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    let (m, v) = (state.m.data_mut(), state.v.data_mut());
    for (k, p) in param.data_mut().iter_mut().enumerate() {
        let g = grad.data()[k];
        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
        let step = lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        *p -= step;
    }
    if param.data().iter().any(|x| !x.is_finite()) {
        return Err(TensorError::NonFinite("adam_step"));
    }
    Ok(())
}

/// Adam over an ordered list of parameter tensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(lr: f64, params: &[Tensor]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            states: params.iter().map(|p| AdamState::new(p.shape())).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != params.len() {
            return Err(TensorError::Shape {
                op: "adam",
                lhs: (params.len(), 1),
                rhs: (grads.len(), 1),
            });
        }
        for ((p, g), s) in params.iter_mut().zip(grads).zip(&mut self.states) {
            adam_step(p, g, s, self.lr, self.beta1, self.beta2, self.eps)?;
        }
        Ok(())
    }
}
