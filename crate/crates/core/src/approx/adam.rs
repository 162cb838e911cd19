use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        OptimizerState {
            step: 0,
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Bias-corrected Adam update in place. Moment vectors grow with zeros when
/// the tabular backend has added rows since the last step.
pub fn optimizer_step(params: &mut Parameters, grads: &[f64], opt: &mut OptimizerState) -> Result<()> {
    let theta = params.theta_mut();
    if grads.len() != theta.len() {
        return Err(Error::ShapeMismatch {
            expected: theta.len(),
            got: grads.len(),
        });
    }
    if opt.m.len() > theta.len() {
        return Err(Error::ShapeMismatch {
            expected: theta.len(),
            got: opt.m.len(),
        });
    }
    opt.m.resize(theta.len(), 0.0);
    opt.v.resize(theta.len(), 0.0);
    opt.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = opt.config;
    let c1 = 1.0 - beta1.powi(opt.step as i32);
    let c2 = 1.0 - beta2.powi(opt.step as i32);
    for i in 0..theta.len() {
        let g = grads[i];
        opt.m[i] = beta1 * opt.m[i] + (1.0 - beta1) * g;
        opt.v[i] = beta2 * opt.v[i] + (1.0 - beta2) * g * g;
        let m_hat = opt.m[i] / c1;
        let v_hat = opt.v[i] / c2;
        theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}
