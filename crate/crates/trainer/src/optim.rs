//! Adaptive-moment optimizer with decoupled weight decay, and the single
//! training step built on it.

use crate::config::TrainConfig;
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::model::{Model, Tensor, Workspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
}

impl AdamW {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        Self {
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
            grad_clip: cfg.grad_clip,
        }
    }
}

/// Everything that evolves during training. Batch randomness is derived
/// from `update_counter`, so this is the complete state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: Model<f32>,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub update_counter: u64,
    grads: Vec<f32>,
}

impl TrainState {
    pub fn new(model: Model<f32>) -> Self {
        let n = model.n_params();
        Self {
            model,
            m: vec![0.0; n],
            v: vec![0.0; n],
            update_counter: 0,
            grads: vec![0.0; n],
        }
    }

    pub fn from_parts(model: Model<f32>, m: Vec<f32>, v: Vec<f32>, update_counter: u64) -> Self {
        let n = model.n_params();
        assert!(
            m.len() == n && v.len() == n,
            "moment vectors must match the parameter count"
        );
        Self {
            model,
            m,
            v,
            update_counter,
            grads: vec![0.0; n],
        }
    }

    /// One forward/backward pass and parameter update. Returns the batch
    /// loss before the update.
    pub fn step(&mut self, ws: &mut Workspace<f32>, batch: &Batch, opt: &AdamW) -> Result<f32> {
        let loss = self
            .model
            .forward(ws, &batch.inputs, Some(&batch.targets))
            .expect("targets given");
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                update: self.update_counter,
                learning_rate: opt.learning_rate,
            });
        }
        self.model.backward(ws, &mut self.grads);

        let norm = self
            .grads
            .iter()
            .map(|&g| (g as f64) * (g as f64))
            .sum::<f64>()
            .sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFiniteLoss {
                update: self.update_counter,
                learning_rate: opt.learning_rate,
            });
        }
        let clip = if norm > opt.grad_clip {
            (opt.grad_clip / norm) as f32
        } else {
            1.0
        };

        self.update_counter += 1;
        let t = self.update_counter as i32;
        let bc1 = 1.0 - opt.beta1.powi(t);
        let bc2 = 1.0 - opt.beta2.powi(t);
        let (b1, b2) = (opt.beta1 as f32, opt.beta2 as f32);
        let (lr, eps) = (opt.learning_rate as f32, opt.eps as f32);
        let (bc1, bc2) = (bc1 as f32, bc2 as f32);
        let layout = self.model.layout().clone();
        for x in Tensor::ALL {
            let wd = if x.decays() {
                opt.weight_decay as f32
            } else {
                0.0
            };
            for i in layout.range(x) {
                let g = self.grads[i] * clip;
                let m = b1 * self.m[i] + (1.0 - b1) * g;
                let v = b2 * self.v[i] + (1.0 - b2) * g * g;
                self.m[i] = m;
                self.v[i] = v;
                let p = &mut self.model.params[i];
                *p -= lr * ((m / bc1) / ((v / bc2).sqrt() + eps) + wd * *p);
            }
        }
        Ok(loss)
    }
}
