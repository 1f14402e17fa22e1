use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter tensor plus the step counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One bias-corrected Adam update using each tensor's gradient slot
/// (a missing gradient counts as zero).
pub fn adam_step(params: &mut [&mut Tensor], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != params.len() {
        return shape_err(format!(
            "adam state tracks {} tensors, got {}",
            state.m.len(),
            params.len()
        ));
    }
    for (p, m) in params.iter().zip(&state.m) {
        if p.len() != m.len() {
            return shape_err(format!("adam moment length {} vs param {:?}", m.len(), p.shape()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        let (data, grad) = p.data_and_grad_mut();
        for i in 0..data.len() {
            let g = grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            data[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// `shadow <- alpha * shadow + (1 - alpha) * current`, elementwise.
pub fn ema_update(shadow: &mut [&mut Tensor], current: &[&Tensor], alpha: f64) -> Result<()> {
    if shadow.len() != current.len() {
        return shape_err(format!(
            "ema over {} shadow tensors and {} current",
            shadow.len(),
            current.len()
        ));
    }
    for (s, c) in shadow.iter().zip(current) {
        if s.shape() != c.shape() {
            return shape_err(format!("ema shape {:?} vs {:?}", s.shape(), c.shape()));
        }
    }
    for (s, c) in shadow.iter_mut().zip(current) {
        for (sv, cv) in s.data_mut().iter_mut().zip(c.data()) {
            *sv = alpha * *sv + (1.0 - alpha) * cv;
        }
    }
    Ok(())
}
