use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers shaped like the parameters, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor<f32>>,
    v: Vec<Tensor<f32>>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor<f32>]) -> Self {
        Self {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [Tensor<f32>], grads: &[Tensor<f32>], st: &mut AdamState, lr: f64, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "one gradient per parameter");
    assert_eq!(params.len(), st.m.len(), "optimizer state matches parameters");
    st.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(st.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(st.t as i32);
    let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
    let (bc1, bc2, eps, lr) = (bc1 as f32, bc2 as f32, cfg.eps as f32, lr as f32);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(st.m.iter_mut().zip(st.v.iter_mut())) {
        assert_eq!(p.shape(), g.shape(), "gradient shape");
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
