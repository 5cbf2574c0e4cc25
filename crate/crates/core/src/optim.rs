//! Adam, RMSProp and the weight-clipping projection.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::nn::ParamSet;
use crate::tensor::Tensor;

pub const ADAM_EPS: f64 = 1e-8;
pub const RMSPROP_EPS: f64 = 1e-10;
pub const RMSPROP_DECAY: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerConfig {
    Adam { lr: f64, beta1: f64, beta2: f64 },
    RmsProp { lr: f64, decay: f64 },
}

impl OptimizerConfig {
    /// Adam with α = 1e-4, β₁ = 0, β₂ = 0.9.
    pub fn adam_default() -> Self {
        OptimizerConfig::Adam { lr: 1e-4, beta1: 0.0, beta2: 0.9 }
    }

    /// RMSProp with α = 5e-5, the weight-clipping baseline.
    pub fn rmsprop_default() -> Self {
        OptimizerConfig::RmsProp { lr: 5e-5, decay: RMSPROP_DECAY }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Adam { lr, .. } | OptimizerConfig::RmsProp { lr, .. } => lr,
        }
    }

    pub fn build(&self) -> Result<Optimizer> {
        Ok(match *self {
            OptimizerConfig::Adam { lr, beta1, beta2 } => Optimizer::Adam(AdamState::new(lr, beta1, beta2)?),
            OptimizerConfig::RmsProp { lr, decay } => Optimizer::RmsProp(RmsPropState::new(lr, decay)?),
        })
    }
}

fn check_grads(params: &ParamSet, grads: &[Tensor]) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::ShapeMismatch {
            op: "optimizer",
            detail: format!("{} gradients for {} parameters", grads.len(), params.len()),
        });
    }
    for ((name, p), g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::ShapeMismatch {
                op: "optimizer",
                detail: format!("gradient of `{name}` has shape {:?}, parameter {:?}", g.shape(), p.shape()),
            });
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteInput { what: "gradient" });
        }
    }
    Ok(())
}

fn zeros_like(params: &ParamSet) -> Vec<Tensor> {
    params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect()
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(invalid(format!("Adam betas ({beta1}, {beta2}) must lie in [0, 1)")));
        }
        Ok(Self { lr, beta1, beta2, eps: ADAM_EPS, step: 0, first: Vec::new(), second: Vec::new() })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        check_grads(params, grads)?;
        if self.first.is_empty() {
            self.first = zeros_like(params);
            self.second = zeros_like(params);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for (k, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (self.first[k].data_mut(), self.second[k].data_mut());
            for (i, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gv;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gv * gv;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *pv -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RmsPropState {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    mean_square: Vec<Tensor>,
}

impl RmsPropState {
    pub fn new(lr: f64, decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(invalid(format!("RMSProp decay {decay} must lie in [0, 1)")));
        }
        Ok(Self { lr, decay, eps: RMSPROP_EPS, mean_square: Vec::new() })
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        check_grads(params, grads)?;
        if self.mean_square.is_empty() {
            self.mean_square = zeros_like(params);
        }
        for (k, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
            let v = self.mean_square[k].data_mut();
            for (i, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                v[i] = self.decay * v[i] + (1.0 - self.decay) * gv * gv;
                *pv -= self.lr * gv / libm::sqrt(v[i] + self.eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Optimizer {
    Adam(AdamState),
    RmsProp(RmsPropState),
}

impl Optimizer {
    /// Applies one update. `grads` follow the iteration order of `params`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        match self {
            Optimizer::Adam(s) => s.step(params, grads),
            Optimizer::RmsProp(s) => s.step(params, grads),
        }
    }
}

/// Projects every entry of every tensor (weights and biases) onto `[-c, c]`.
pub fn clip_weights(params: &mut ParamSet, c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(invalid(format!("clip bound {c} must be positive")));
    }
    for (_, t) in params.iter_mut() {
        for v in t.data_mut() {
            *v = v.max(-c).min(c);
        }
    }
    Ok(())
}
