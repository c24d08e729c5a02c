//! Word segmentation, normalization and correctness labeling.
//!
//! A word is a maximal run of characters that are neither Unicode whitespace
//! nor ASCII punctuation. Apostrophes and hyphens are boundaries, so `O'er`
//! yields two units. The same rules build the corpus vocabulary, so labels
//! stay consistent between the reference and generated text.

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Correct,
    Incorrect,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Correct => "correct",
            Label::Incorrect => "incorrect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledWord {
    pub surface: String,
    pub normalized: String,
    pub label: Label,
    pub position: usize,
}

/// Where a stream came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StreamSource {
    pub seed: u64,
    pub checkpoint: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledWordStream {
    words: Vec<LabeledWord>,
    pub source: StreamSource,
}

impl LabeledWordStream {
    /// Builds a stream from `(normalized word, label)` pairs, assigning
    /// contiguous positions.
    pub fn from_labels<I, S>(items: I, source: StreamSource) -> Self
    where
        I: IntoIterator<Item = (S, Label)>,
        S: Into<String>,
    {
        let words = items
            .into_iter()
            .enumerate()
            .map(|(position, (w, label))| {
                let w = w.into();
                LabeledWord {
                    surface: w.clone(),
                    normalized: w,
                    label,
                    position,
                }
            })
            .collect();
        Self { words, source }
    }

    pub fn words(&self) -> &[LabeledWord] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.words.iter().map(|w| w.label)
    }

    pub fn count(&self, label: Label) -> usize {
        self.words.iter().filter(|w| w.label == label).count()
    }

    /// Joins the surface forms with single spaces. Re-labeling the result
    /// against the same vocabulary reproduces this stream.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&w.surface);
        }
        out
    }
}

#[inline]
pub fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || c.is_ascii_punctuation()
}

/// Splits `text` into maximal runs of non-delimiter characters.
pub fn segment(text: &str) -> Vec<&str> {
    text.split(is_delimiter).filter(|s| !s.is_empty()).collect()
}

/// Lowercase fold.
pub fn normalize(surface: &str) -> String {
    surface.to_lowercase()
}

/// Segment, normalize and label `text` against the corpus vocabulary.
pub fn label_stream(text: &str, bundle: &CorpusBundle, source: StreamSource) -> LabeledWordStream {
    let words = segment(text)
        .into_iter()
        .enumerate()
        .map(|(position, surface)| {
            let normalized = normalize(surface);
            let label = if bundle.contains_word(&normalized) {
                Label::Correct
            } else {
                Label::Incorrect
            };
            LabeledWord {
                surface: surface.to_string(),
                normalized,
                label,
                position,
            }
        })
        .collect();
    LabeledWordStream { words, source }
}
