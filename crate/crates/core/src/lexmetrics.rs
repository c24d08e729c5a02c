//! Vocabulary growth, word length and prefix-consolidation metrics.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::detector::{MetricSeries, SeriesPoint};
use crate::error::{Error, Result};
use crate::segmenter::{Label, LabeledWordStream};
use crate::stats::{self, CountHistogram, DispersionResult, StatsConfig};

pub const DEFAULT_PREFIX_CHAIN: [&str; 3] = ["y", "yo", "you"];
pub const DEFAULT_TOP_K: usize = 20;

/// Distinct normalized forms per class: `(correct, incorrect)`.
pub fn unique_vocab(stream: &LabeledWordStream) -> (usize, usize) {
    let mut correct = HashSet::new();
    let mut incorrect = HashSet::new();
    for w in stream.words() {
        match w.label {
            Label::Correct => correct.insert(w.normalized.as_str()),
            Label::Incorrect => incorrect.insert(w.normalized.as_str()),
        };
    }
    (correct.len(), incorrect.len())
}

/// Mean character length of correct words, `None` when there are none.
pub fn mean_correct_length(stream: &LabeledWordStream) -> Option<f64> {
    let (n, total) = stream
        .words()
        .iter()
        .filter(|w| w.label == Label::Correct)
        .fold((0usize, 0usize), |(n, t), w| {
            (n + 1, t + w.normalized.chars().count())
        });
    (n > 0).then(|| total as f64 / n as f64)
}

/// Checks that every entry is a strict prefix of its successor.
pub fn validate_chain<S: AsRef<str>>(chain: &[S]) -> Result<()> {
    for pair in chain.windows(2) {
        let (a, b) = (pair[0].as_ref(), pair[1].as_ref());
        if a.is_empty() || a.len() >= b.len() || !b.starts_with(a) {
            return Err(Error::BrokenPrefixChain(a.to_string(), b.to_string()));
        }
    }
    Ok(())
}

/// Standalone occurrence counts of each chain entry. Substrings of longer
/// words do not count: `young` contributes nothing to `you`.
pub fn prefix_counts<S: AsRef<str>>(
    stream: &LabeledWordStream,
    chain: &[S],
) -> Result<BTreeMap<String, u64>> {
    validate_chain(chain)?;
    let mut counts: BTreeMap<String, u64> =
        chain.iter().map(|w| (w.as_ref().to_string(), 0)).collect();
    for w in stream.words() {
        if let Some(c) = counts.get_mut(&w.normalized) {
            *c += 1;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCount {
    pub word: String,
    pub count: u64,
    pub label: Label,
}

/// Top `k` normalized words by count; ties break lexicographically.
pub fn top_words(stream: &LabeledWordStream, k: usize) -> Vec<WordCount> {
    let mut counts: HashMap<&str, (u64, Label)> = HashMap::new();
    for w in stream.words() {
        counts
            .entry(w.normalized.as_str())
            .or_insert((0, w.label))
            .0 += 1;
    }
    let mut ranked: Vec<WordCount> = counts
        .into_iter()
        .map(|(word, (count, label))| WordCount {
            word: word.to_string(),
            count,
            label,
        })
        .collect();
    ranked.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    ranked.truncate(k);
    ranked
}

/// Per-class count statistics for one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub lambda_hat: f64,
    pub mean: f64,
    pub variance: Option<f64>,
    #[serde(rename = "D")]
    pub fano: Option<f64>,
    #[serde(rename = "KL")]
    pub kl: Option<f64>,
    pub n_windows: usize,
    pub pmf: Vec<f64>,
    pub counts: Vec<u32>,
}

impl ClassStats {
    pub fn from_histogram(hist: &CountHistogram) -> Self {
        let DispersionResult {
            mean,
            variance,
            fano,
        } = stats::dispersion(hist);
        Self {
            lambda_hat: hist.lambda_hat,
            mean,
            variance,
            fano,
            kl: stats::kl_to_poisson(hist).ok(),
            n_windows: hist.n_windows,
            pmf: hist.pmf.clone(),
            counts: hist.counts_per_window.clone(),
        }
    }

    pub fn histogram(&self, window_size: usize) -> Result<CountHistogram> {
        CountHistogram::from_counts(self.counts.clone(), window_size)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexConfig {
    pub prefix_chain: Vec<String>,
    pub top_k: usize,
}

impl Default for LexConfig {
    fn default() -> Self {
        Self {
            prefix_chain: DEFAULT_PREFIX_CHAIN.iter().map(|s| s.to_string()).collect(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

/// Every scalar probe for one `(seed, checkpoint)` sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetrics {
    pub seed: u64,
    pub checkpoint: u64,
    #[serde(rename = "W")]
    pub window_size: usize,
    pub correct: ClassStats,
    pub incorrect: ClassStats,
    #[serde(rename = "V_uniq_correct")]
    pub v_uniq_correct: usize,
    #[serde(rename = "V_uniq_incorrect")]
    pub v_uniq_incorrect: usize,
    pub mean_len: Option<f64>,
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub prefix_counts: BTreeMap<String, u64>,
    pub top_words: Vec<WordCount>,
}

impl CheckpointMetrics {
    pub fn compute(
        stream: &LabeledWordStream,
        stats_cfg: StatsConfig,
        lex: &LexConfig,
    ) -> Result<Self> {
        let (v_uniq_correct, v_uniq_incorrect) = unique_vocab(stream);
        Ok(Self {
            seed: stream.source.seed,
            checkpoint: stream.source.checkpoint,
            window_size: stats_cfg.window_size,
            correct: ClassStats::from_histogram(&stats::window_counts(
                stream,
                Label::Correct,
                stats_cfg,
            )),
            incorrect: ClassStats::from_histogram(&stats::window_counts(
                stream,
                Label::Incorrect,
                stats_cfg,
            )),
            v_uniq_correct,
            v_uniq_incorrect,
            mean_len: mean_correct_length(stream),
            n_correct: stream.count(Label::Correct),
            n_incorrect: stream.count(Label::Incorrect),
            prefix_counts: prefix_counts(stream, &lex.prefix_chain)?,
            top_words: top_words(stream, lex.top_k),
        })
    }

    pub fn class(&self, label: Label) -> &ClassStats {
        match label {
            Label::Correct => &self.correct,
            Label::Incorrect => &self.incorrect,
        }
    }

    /// Named scalar view used to build time series. Undefined probes map to
    /// `None`.
    pub fn scalar(&self, name: &str) -> Option<f64> {
        match name {
            "D_correct" => self.correct.fano,
            "D_incorrect" => self.incorrect.fano,
            "KL_correct" => self.correct.kl,
            "KL_incorrect" => self.incorrect.kl,
            "lambda_correct" => Some(self.correct.lambda_hat),
            "lambda_incorrect" => Some(self.incorrect.lambda_hat),
            "V_uniq_correct" => Some(self.v_uniq_correct as f64),
            "V_uniq_incorrect" => Some(self.v_uniq_incorrect as f64),
            "mean_len" => self.mean_len,
            "n_correct" => Some(self.n_correct as f64),
            "n_incorrect" => Some(self.n_incorrect as f64),
            other => other
                .strip_prefix("prefix:")
                .and_then(|w| self.prefix_counts.get(w))
                .map(|&c| c as f64),
        }
    }

    /// Names accepted by [`CheckpointMetrics::scalar`] for this record.
    pub fn scalar_names(&self) -> Vec<String> {
        let mut names: Vec<String> = SCALAR_METRICS.iter().map(|s| s.to_string()).collect();
        names.extend(self.prefix_counts.keys().map(|w| format!("prefix:{w}")));
        names
    }
}

/// Builds the series of one named scalar across checkpoints. Records must
/// come from a single seed, or be pooled, and are sorted by checkpoint.
pub fn metric_series(
    records: &[CheckpointMetrics],
    name: &str,
    seed: Option<u64>,
) -> Result<MetricSeries> {
    let mut points: Vec<SeriesPoint> = records
        .iter()
        .map(|r| SeriesPoint {
            checkpoint: r.checkpoint,
            value: r.scalar(name),
        })
        .collect();
    points.sort_by_key(|p| p.checkpoint);
    MetricSeries::new(name, seed, points)
}

pub const SCALAR_METRICS: [&str; 11] = [
    "D_correct",
    "D_incorrect",
    "KL_correct",
    "KL_incorrect",
    "lambda_correct",
    "lambda_incorrect",
    "V_uniq_correct",
    "V_uniq_incorrect",
    "mean_len",
    "n_correct",
    "n_incorrect",
];
