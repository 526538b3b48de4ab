//! Bias-corrected Adam.

use super::params::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        Self {
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// In-place update; on error neither state nor params are touched.
    pub fn step_in_place(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        if !params.same_shape(grads) || self.m.len() != params.len() || self.v.len() != params.len() {
            return Err(Error::Shape {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        if let Some(i) = grads.as_slice().iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                epoch: 0,
                detail: format!("non-finite gradient component {i} at Adam step {}", self.step + 1),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        for (((p, &g), m), v) in params
            .as_mut_slice()
            .iter_mut()
            .zip(grads.as_slice())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Pure Adam step: returns the updated state and parameters.
pub fn adam_step(
    state: &AdamState,
    params: &ModelParams,
    grads: &ModelParams,
) -> Result<(AdamState, ModelParams)> {
    let mut s = state.clone();
    let mut p = params.clone();
    s.step_in_place(&mut p, grads)?;
    Ok((s, p))
}
