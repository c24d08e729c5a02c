//! Corpus ingestion: character inventory, reference word vocabulary and the
//! train/validation split.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::segmenter::{normalize, segment};

pub const DEFAULT_VAL_FRACTION: f64 = 0.1;

/// An immutable, fully indexed training corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusBundle {
    text: String,
    char_vocab: Vec<char>,
    word_vocab: HashSet<String>,
    /// Split position in characters.
    split_point: usize,
    split_byte: usize,
    source: Option<PathBuf>,
}

impl CorpusBundle {
    /// Builds a bundle from in-memory text.
    pub fn from_text(text: impl Into<String>, val_fraction: f64) -> Result<Self> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(Error::InvalidFraction(val_fraction));
        }
        let text = text.into();
        let n_chars = text.chars().count();
        if n_chars < 2 {
            return Err(Error::CorpusTooShort(n_chars));
        }

        let mut seen = HashSet::new();
        let char_vocab: Vec<char> = text.chars().filter(|c| seen.insert(*c)).collect();

        let word_vocab = segment(&text).into_iter().map(normalize).collect();

        let split_point = ((n_chars as f64) * (1.0 - val_fraction)).floor() as usize;
        let split_point = split_point.clamp(1, n_chars - 1);
        let split_byte = text
            .char_indices()
            .nth(split_point)
            .map(|(i, _)| i)
            .unwrap_or(text.len());

        Ok(Self {
            text,
            char_vocab,
            word_vocab,
            split_point,
            split_byte,
            source: None,
        })
    }

    /// Builds a bundle from a word list; used for synthetic runs where the
    /// reference vocabulary is known up front.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let text = words
            .iter()
            .map(|w| w.as_ref())
            .collect::<Vec<_>>()
            .join("\n");
        Self::from_text(text, DEFAULT_VAL_FRACTION)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn char_vocab(&self) -> &[char] {
        &self.char_vocab
    }

    pub fn word_vocab(&self) -> &HashSet<String> {
        &self.word_vocab
    }

    pub fn split_point(&self) -> usize {
        self.split_point
    }

    pub fn train_text(&self) -> &str {
        &self.text[..self.split_byte]
    }

    pub fn val_text(&self) -> &str {
        &self.text[self.split_byte..]
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Number of characters in the corpus.
    pub fn len_chars(&self) -> usize {
        self.text.chars().count()
    }

    /// Hex SHA-256 of the raw corpus bytes.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    /// `word` must already be normalized.
    pub fn contains_word(&self, word: &str) -> bool {
        self.word_vocab.contains(word)
    }
}

/// Loads a UTF-8 corpus file.
pub fn load_corpus(path: impl AsRef<Path>, val_fraction: f64) -> Result<CorpusBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::NotUtf8(path.to_path_buf()))?;
    let mut bundle = CorpusBundle::from_text(text, val_fraction)?;
    bundle.source = Some(path.to_path_buf());
    Ok(bundle)
}

/// Free-function form of [`CorpusBundle::contains_word`].
pub fn contains_word(bundle: &CorpusBundle, word: &str) -> bool {
    bundle.contains_word(word)
}
