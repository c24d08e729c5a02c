//! Model and training configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub context_len: usize,
    /// Filled from the corpus when zero.
    #[serde(default)]
    pub vocab_size: usize,
}

impl ModelConfig {
    /// 192-dim, 8 layers, 6 heads, 128-character context.
    pub fn full(vocab_size: usize) -> Self {
        Self {
            embed_dim: 192,
            n_layers: 8,
            n_heads: 6,
            context_len: 128,
            vocab_size,
        }
    }

    /// 64-dim, 2 layers, 2 heads, 64-character context.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            embed_dim: 64,
            n_layers: 2,
            n_heads: 2,
            context_len: 64,
            vocab_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.into()));
        if self.embed_dim == 0 || self.n_layers == 0 || self.n_heads == 0 || self.context_len == 0 {
            return bad("embed_dim, n_layers, n_heads and context_len must be positive");
        }
        if !self.embed_dim.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidModel(format!(
                "embed_dim {} is not divisible by n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }

    /// Closed-form parameter count of the tied-embedding layout.
    pub fn n_params(&self) -> usize {
        let (v, t, c, l) = (
            self.vocab_size,
            self.context_len,
            self.embed_dim,
            self.n_layers,
        );
        v * c + t * c + l * (12 * c * c + 13 * c) + 2 * c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DecodeMode {
    Greedy,
    Multinomial { temperature: f64 },
}

impl Default for DecodeMode {
    fn default() -> Self {
        DecodeMode::Multinomial { temperature: 1.0 }
    }
}

impl DecodeMode {
    pub fn is_stochastic(&self) -> bool {
        matches!(self, DecodeMode::Multinomial { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seeds: Vec<u64>,
    /// Checkpoints run from 0 (untrained) to this index inclusive.
    pub total_checkpoints: u64,
    pub updates_per_checkpoint: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub grad_clip: f64,
    /// Batches drawn from each split to estimate the logged losses.
    pub eval_batches: usize,
    pub sample_tokens: usize,
    pub decode: DecodeMode,
    pub prompt: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            total_checkpoints: 600,
            updates_per_checkpoint: 50,
            batch_size: 64,
            learning_rate: 3e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 1.0,
            eval_batches: 4,
            sample_tokens: 30_000,
            decode: DecodeMode::default(),
            prompt: "\n".into(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrain(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.sample_tokens == 0 {
            return bad("sample_tokens must be at least 1".into());
        }
        if self.batch_size == 0 || self.eval_batches == 0 {
            return bad("batch_size and eval_batches must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)".into());
        }
        if self.weight_decay < 0.0
            || self.adam_eps.is_nan()
            || self.adam_eps <= 0.0
            || self.grad_clip.is_nan()
            || self.grad_clip <= 0.0
        {
            return bad(
                "weight_decay must be non-negative; adam_eps and grad_clip positive".into(),
            );
        }
        if let DecodeMode::Multinomial { temperature } = self.decode {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return bad(format!("temperature must be positive, got {temperature}"));
            }
        }
        if self.prompt.is_empty() {
            return bad("prompt must not be empty".into());
        }
        Ok(())
    }
}
