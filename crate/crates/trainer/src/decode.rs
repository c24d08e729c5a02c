//! Autoregressive sampling with a key/value cache.
//!
//! When the context fills up, the most recent half of it is kept, the cache
//! is rebuilt from those tokens at positions `0..context_len / 2`, and
//! generation continues. This bounds the per-token cost at the price of
//! conditioning on between half and all of the context window.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::DecodeMode;
use crate::data::Tokenizer;
use crate::error::Result;
use crate::kernels::{attend_row, gelu, layernorm_row, matmul_forward};
use crate::model::{Model, Tensor};

/// Source of next-token logits for a growing sequence.
pub trait LogitSource {
    fn context_len(&self) -> usize;
    fn reset(&mut self);
    /// Appends `token` at the next position and returns the logits for the
    /// position after it.
    fn push(&mut self, token: u32) -> &[f32];
}

/// Incremental decoder over a trained model.
pub struct KvDecoder<'m> {
    model: &'m Model<f32>,
    pos: usize,
    keys: Vec<Vec<f32>>,
    values: Vec<Vec<f32>>,
    x: Vec<f32>,
    xn: Vec<f32>,
    qkv: Vec<f32>,
    y: Vec<f32>,
    h: Vec<f32>,
    tmp: Vec<f32>,
    att: Vec<f32>,
    logits: Vec<f32>,
}

impl<'m> KvDecoder<'m> {
    pub fn new(model: &'m Model<f32>) -> Self {
        let cfg = model.config();
        let (c, t, l) = (cfg.embed_dim, cfg.context_len, cfg.n_layers);
        Self {
            model,
            pos: 0,
            keys: vec![vec![0.0; t * c]; l],
            values: vec![vec![0.0; t * c]; l],
            x: vec![0.0; c],
            xn: vec![0.0; c],
            qkv: vec![0.0; 3 * c],
            y: vec![0.0; c],
            h: vec![0.0; 4 * c],
            tmp: vec![0.0; c],
            att: vec![0.0; t],
            logits: vec![0.0; cfg.vocab_size],
        }
    }

    pub fn position(&self) -> usize {
        self.pos
    }
}

impl LogitSource for KvDecoder<'_> {
    fn context_len(&self) -> usize {
        self.model.config().context_len
    }

    fn reset(&mut self) {
        self.pos = 0;
    }

    fn push(&mut self, token: u32) -> &[f32] {
        let m = self.model;
        let cfg = m.config();
        let (c, nh, hs) = (cfg.embed_dim, cfg.n_heads, cfg.head_dim());
        let pos = self.pos;
        assert!(pos < cfg.context_len, "context is full; reset first");
        let tok = token as usize;
        let (wte, wpe) = (m.p(Tensor::Wte), m.p(Tensor::Wpe));
        for k in 0..c {
            self.x[k] = wte[tok * c + k] + wpe[pos * c + k];
        }
        for l in 0..cfg.n_layers {
            layernorm_row(
                &mut self.xn,
                &self.x,
                m.pl(Tensor::Ln1W, l),
                m.pl(Tensor::Ln1B, l),
            );
            matmul_forward(
                &mut self.qkv,
                &self.xn,
                m.pl(Tensor::QkvW, l),
                Some(m.pl(Tensor::QkvB, l)),
                c,
                3 * c,
            );
            self.keys[l][pos * c..(pos + 1) * c].copy_from_slice(&self.qkv[c..2 * c]);
            self.values[l][pos * c..(pos + 1) * c].copy_from_slice(&self.qkv[2 * c..]);
            let (keys, values) = (&self.keys[l], &self.values[l]);
            for h in 0..nh {
                attend_row(
                    &self.qkv[h * hs..(h + 1) * hs],
                    |t2| &keys[t2 * c + h * hs..t2 * c + (h + 1) * hs],
                    |t2| &values[t2 * c + h * hs..t2 * c + (h + 1) * hs],
                    pos,
                    &mut self.att,
                    &mut self.y[h * hs..(h + 1) * hs],
                );
            }
            matmul_forward(
                &mut self.tmp,
                &self.y,
                m.pl(Tensor::AttProjW, l),
                Some(m.pl(Tensor::AttProjB, l)),
                c,
                c,
            );
            for k in 0..c {
                self.x[k] += self.tmp[k];
            }
            layernorm_row(
                &mut self.xn,
                &self.x,
                m.pl(Tensor::Ln2W, l),
                m.pl(Tensor::Ln2B, l),
            );
            matmul_forward(
                &mut self.h,
                &self.xn,
                m.pl(Tensor::FcW, l),
                Some(m.pl(Tensor::FcB, l)),
                c,
                4 * c,
            );
            self.h.iter_mut().for_each(|v| *v = gelu(*v));
            matmul_forward(
                &mut self.tmp,
                &self.h,
                m.pl(Tensor::FcProjW, l),
                Some(m.pl(Tensor::FcProjB, l)),
                4 * c,
                c,
            );
            for k in 0..c {
                self.x[k] += self.tmp[k];
            }
        }
        layernorm_row(&mut self.xn, &self.x, m.p(Tensor::LnfW), m.p(Tensor::LnfB));
        matmul_forward(&mut self.logits, &self.xn, wte, None, c, cfg.vocab_size);
        self.pos += 1;
        &self.logits
    }
}

/// Chooses the next token. Greedy ties resolve to the lowest id.
pub fn pick_token(logits: &[f32], mode: DecodeMode, rng: &mut ChaCha8Rng) -> u32 {
    match mode {
        DecodeMode::Greedy => {
            let mut best = 0;
            for (i, &l) in logits.iter().enumerate() {
                if l > logits[best] {
                    best = i;
                }
            }
            best as u32
        }
        DecodeMode::Multinomial { temperature } => {
            let max = logits.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
            let weights: Vec<f64> = logits
                .iter()
                .map(|&l| ((l as f64 - max) / temperature).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    return i as u32;
                }
                u -= w;
            }
            // Rounding left `u` past the last bucket: take the last token
            // with non-zero weight.
            weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) as u32
        }
    }
}

/// Generates exactly `n_tokens` characters after `prompt`, sliding the
/// context as described in the module docs.
pub fn generate<S: LogitSource>(
    source: &mut S,
    tokenizer: &Tokenizer,
    prompt: &str,
    n_tokens: usize,
    mode: DecodeMode,
    rng: &mut ChaCha8Rng,
) -> Result<String> {
    let ctx = source.context_len();
    let mut history = tokenizer.encode(prompt)?;
    if history.len() > ctx {
        history.drain(..history.len() - ctx);
    }
    source.reset();
    let mut logits = Vec::new();
    for &tok in &history {
        logits = source.push(tok).to_vec();
    }
    let mut out = String::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        let next = pick_token(&logits, mode, rng);
        out.push(tokenizer.decode_token(next));
        history.push(next);
        if history.len() > ctx {
            let keep = (ctx / 2).max(1);
            history.drain(..history.len() - keep);
            source.reset();
            for &tok in &history[..history.len() - 1] {
                source.push(tok);
            }
        }
        logits = source.push(next).to_vec();
    }
    Ok(out)
}
