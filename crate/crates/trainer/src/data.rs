//! Character tokenizer and seeded mini-batch sampling.

use std::collections::HashMap;

use lexphase_core::rng::stream_rng;
use lexphase_core::CorpusBundle;
use rand::Rng;

use crate::error::{Error, Result};

/// Bijection between corpus characters and token ids, ids assigned in
/// sorted character order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    chars: Vec<char>,
    ids: HashMap<char, u32>,
}

impl Tokenizer {
    pub fn new(chars: impl IntoIterator<Item = char>) -> Self {
        let mut chars: Vec<char> = chars.into_iter().collect();
        chars.sort_unstable();
        chars.dedup();
        let ids = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u32))
            .collect();
        Self { chars, ids }
    }

    pub fn from_bundle(bundle: &CorpusBundle) -> Self {
        Self::new(bundle.char_vocab().iter().copied())
    }

    pub fn vocab_size(&self) -> usize {
        self.chars.len()
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        text.chars()
            .map(|c| self.ids.get(&c).copied().ok_or(Error::UnknownChar(c)))
            .collect()
    }

    pub fn decode_token(&self, id: u32) -> char {
        self.chars[id as usize]
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter().map(|&i| self.decode_token(i)).collect()
    }
}

/// `batch_size` sequences of `context_len + 1` tokens, flattened row-major
/// into inputs and next-token targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub batch_size: usize,
    pub seq_len: usize,
    pub inputs: Vec<u32>,
    pub targets: Vec<u32>,
}

/// Token ids of one split with uniform random windows.
#[derive(Debug, Clone)]
pub struct TokenSplit {
    name: &'static str,
    tokens: Vec<u32>,
}

impl TokenSplit {
    pub fn new(name: &'static str, tokens: Vec<u32>, seq_len: usize) -> Result<Self> {
        if tokens.len() < seq_len + 1 {
            return Err(Error::SplitTooShort {
                split: name,
                got: tokens.len(),
                needed: seq_len + 1,
            });
        }
        Ok(Self { name, tokens })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    /// Draws a batch whose randomness depends only on `(seed, purpose,
    /// index)`, so a run can resume from a bare update counter.
    pub fn batch(
        &self,
        batch_size: usize,
        seq_len: usize,
        seed: u64,
        purpose: &str,
        index: u64,
    ) -> Batch {
        let mut rng = stream_rng(seed, purpose, index);
        let max_start = self.tokens.len() - seq_len - 1;
        let mut inputs = Vec::with_capacity(batch_size * seq_len);
        let mut targets = Vec::with_capacity(batch_size * seq_len);
        for _ in 0..batch_size {
            let s = rng.random_range(0..=max_start);
            inputs.extend_from_slice(&self.tokens[s..s + seq_len]);
            targets.extend_from_slice(&self.tokens[s + 1..s + seq_len + 1]);
        }
        Batch {
            batch_size,
            seq_len,
            inputs,
            targets,
        }
    }
}
