//! Synthetic labeled streams with known count statistics, and a
//! consolidation simulator with a planted transition.
//!
//! Stream generators and their targets at window size `W`:
//!
//! | kind              | per-window correct count        | dispersion    |
//! |-------------------|---------------------------------|---------------|
//! | `BernoulliLabels` | Binomial(W, p)                  | 1 - p         |
//! | `PoissonStream`   | Poisson(λ), truncated at W      | ≈ 1           |
//! | `RegularStream`   | W / period when period divides W | 0            |
//! | `BurstyStream`    | clustered arrivals              | > 1           |

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusBundle;
use crate::error::{Error, Result};
use crate::lexmetrics::{CheckpointMetrics, LexConfig};
use crate::rng::stream_rng;
use crate::segmenter::{label_stream, Label, LabeledWordStream, StreamSource};
use crate::stats::{StatsConfig, DEFAULT_WINDOW};

/// Reference vocabulary for synthetic runs. The first six entries are the
/// short forms (mean length 1.5) that dominate before consolidation.
pub const DEFAULT_VOCAB: &[&str] = &[
    "a", "i", "o", "to", "be", "me", "the", "and", "you", "that", "with", "not", "his", "this",
    "but", "for", "thou", "thy", "love", "king", "lord", "good", "well", "what", "shall", "come",
    "sweet", "heaven", "night", "death", "heart", "father", "brother", "gentle", "honour", "speak",
    "blood", "grace", "crown", "friend",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SyntheticKind {
    PoissonStream { lambda: f64 },
    RegularStream { period: usize },
    BurstyStream { burst_size: usize, gap: f64 },
    BernoulliLabels { p: f64 },
    Consolidation(ConsolidationSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidationSpec {
    /// Planted transition checkpoint.
    pub t_star: f64,
    /// Logistic scale of the schedule, in checkpoints. Zero gives a step.
    pub ramp: f64,
    #[serde(default = "default_vocab")]
    pub vocab: Vec<String>,
    #[serde(default = "default_windows_per_sample")]
    pub windows_per_sample: usize,
}

fn default_vocab() -> Vec<String> {
    DEFAULT_VOCAB.iter().map(|s| s.to_string()).collect()
}

fn default_windows_per_sample() -> usize {
    300
}

impl ConsolidationSpec {
    pub fn new(t_star: f64, ramp: f64) -> Self {
        Self {
            t_star,
            ramp,
            vocab: default_vocab(),
            windows_per_sample: default_windows_per_sample(),
        }
    }
}

/// `length` counts windows for streams and checkpoints for consolidation
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub length: usize,
    pub window_size: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, length: usize, seed: u64) -> Self {
        Self {
            kind,
            length,
            window_size: DEFAULT_WINDOW,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.window_size == 0 {
            return bad("window_size must be positive".into());
        }
        if self.length == 0 {
            return bad("length must be positive".into());
        }
        match &self.kind {
            SyntheticKind::PoissonStream { lambda } => {
                if !(*lambda > 0.0 && *lambda < self.window_size as f64) {
                    return bad(format!("lambda {lambda} must lie in (0, W)"));
                }
            }
            SyntheticKind::RegularStream { period } => {
                if *period == 0 {
                    return bad("period must be positive".into());
                }
            }
            SyntheticKind::BurstyStream { burst_size, gap } => {
                if *burst_size == 0 || gap.is_nan() || *gap <= 0.0 {
                    return bad("burst_size and gap must be positive".into());
                }
            }
            SyntheticKind::BernoulliLabels { p } => {
                if !(0.0..=1.0).contains(p) {
                    return bad(format!("p {p} must lie in [0, 1]"));
                }
            }
            SyntheticKind::Consolidation(c) => {
                if c.vocab.is_empty() {
                    return bad("consolidation vocabulary is empty".into());
                }
                if !(0.0..=self.length as f64).contains(&c.t_star) {
                    return bad(format!("t_star {} outside [0, {}]", c.t_star, self.length));
                }
                if c.ramp.is_nan() || c.ramp < 0.0 || c.windows_per_sample == 0 {
                    return bad("ramp must be non-negative and windows_per_sample positive".into());
                }
                if !c.vocab.iter().any(|w| w.chars().count() >= 3) {
                    return bad("consolidation vocabulary needs words of length >= 3".into());
                }
            }
        }
        Ok(())
    }

    /// Reference corpus that labels every generated word correctly.
    pub fn bundle(&self) -> Result<CorpusBundle> {
        match &self.kind {
            SyntheticKind::Consolidation(c) => CorpusBundle::from_words(&c.vocab),
            _ => CorpusBundle::from_words(DEFAULT_VOCAB),
        }
    }
}

/// Incorrect forms: proper prefixes of vocabulary words first, then
/// pseudo-random letter strings. None of them is in `vocab`.
fn incorrect_forms(vocab: &[String], n: usize) -> Vec<String> {
    let known: HashSet<&str> = vocab.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    for w in vocab {
        let chars: Vec<char> = w.chars().collect();
        for k in 1..chars.len() {
            let p: String = chars[..k].iter().collect();
            if !known.contains(p.as_str()) && seen.insert(p.clone()) {
                out.push(p);
            }
        }
    }
    let mut rng = stream_rng(0, "synth/garbage", 0);
    while out.len() < n {
        let len = rng.random_range(2..=4);
        let s: String = (0..len)
            .map(|_| rng.random_range(b'a'..=b'z') as char)
            .collect();
        if !known.contains(s.as_str()) && seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out.truncate(n);
    out
}

fn stream_words(
    labels: Vec<Label>,
    rng: &mut ChaCha8Rng,
    source: StreamSource,
) -> LabeledWordStream {
    let correct = DEFAULT_VOCAB;
    let vocab: Vec<String> = DEFAULT_VOCAB.iter().map(|s| s.to_string()).collect();
    let wrong = incorrect_forms(&vocab, 64);
    let items: Vec<(String, Label)> = labels
        .into_iter()
        .map(|l| {
            let w = match l {
                Label::Correct => correct[rng.random_range(0..correct.len())].to_string(),
                Label::Incorrect => wrong[rng.random_range(0..wrong.len())].clone(),
            };
            (w, l)
        })
        .collect();
    LabeledWordStream::from_labels(items, source)
}

fn window_labels(k: usize, w: usize, rng: &mut ChaCha8Rng) -> Vec<Label> {
    let mut v: Vec<Label> = (0..w)
        .map(|i| {
            if i < k {
                Label::Correct
            } else {
                Label::Incorrect
            }
        })
        .collect();
    v.shuffle(rng);
    v
}

/// Generates a labeled stream of `length` windows for the non-consolidation
/// kinds.
pub fn generate_labeled_stream(spec: &SyntheticSpec) -> Result<LabeledWordStream> {
    generate_stream_sample(spec, 0)
}

/// Independent draw of the same stream kind for one checkpoint of a
/// synthetic run. Checkpoint 0 equals [`generate_labeled_stream`].
pub fn generate_stream_sample(spec: &SyntheticSpec, checkpoint: u64) -> Result<LabeledWordStream> {
    spec.validate()?;
    let w = spec.window_size;
    let n_words = spec.length * w;
    let mut rng = stream_rng(spec.seed, "synth/stream", checkpoint);
    let labels: Vec<Label> = match &spec.kind {
        SyntheticKind::BernoulliLabels { p } => (0..n_words)
            .map(|_| {
                if rng.random_bool(*p) {
                    Label::Correct
                } else {
                    Label::Incorrect
                }
            })
            .collect(),
        SyntheticKind::PoissonStream { lambda } => {
            let pois = Poisson::new(*lambda).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let mut v = Vec::with_capacity(n_words);
            for _ in 0..spec.length {
                let k = loop {
                    let k = pois.sample(&mut rng) as usize;
                    if k <= w {
                        break k;
                    }
                };
                v.extend(window_labels(k, w, &mut rng));
            }
            v
        }
        SyntheticKind::RegularStream { period } => (0..n_words)
            .map(|i| {
                if i % period == 0 {
                    Label::Correct
                } else {
                    Label::Incorrect
                }
            })
            .collect(),
        SyntheticKind::BurstyStream { burst_size, gap } => {
            let geo =
                Geometric::new(1.0 / (gap + 1.0)).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let mut v = Vec::with_capacity(n_words + burst_size);
            while v.len() < n_words {
                let g = geo.sample(&mut rng) as usize;
                v.extend(std::iter::repeat_n(Label::Incorrect, g));
                v.extend(std::iter::repeat_n(Label::Correct, *burst_size));
            }
            v.truncate(n_words);
            v
        }
        SyntheticKind::Consolidation(_) => {
            return Err(Error::InvalidSpec(
                "consolidation specs generate runs, not single streams".into(),
            ))
        }
    };
    Ok(stream_words(
        labels,
        &mut rng,
        StreamSource {
            seed: spec.seed,
            checkpoint,
        },
    ))
}

/// Planted schedule of the consolidation simulator at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// Logistic progress from 0 (fragments) to 1 (consolidated).
    pub progress: f64,
    /// Bump that peaks at the transition.
    pub bump: f64,
    /// Mean fraction of correct words.
    pub p_correct: f64,
    /// Share of windows whose correct words arrive in pairs.
    pub paired_share: f64,
    /// Number of distinct incorrect forms in play.
    pub fragment_pool: usize,
}

const P_EARLY: f64 = 0.15;
const P_LATE: f64 = 0.8;
const POOL_EARLY: f64 = 10.0;
const POOL_LATE: f64 = 30.0;
const POOL_PEAK: f64 = 300.0;
const LONG_WORD_SHARE: f64 = 0.9;

impl Schedule {
    pub fn at(spec: &ConsolidationSpec, checkpoint: f64, window: usize) -> Self {
        let x = checkpoint - spec.t_star;
        let progress = if spec.ramp > 0.0 {
            1.0 / (1.0 + (-x / spec.ramp).exp())
        } else if x < 0.0 {
            0.0
        } else if x > 0.0 {
            1.0
        } else {
            0.5
        };
        let bump = (4.0 * progress * (1.0 - progress)).powi(2);
        let pool = POOL_EARLY + POOL_LATE * progress + POOL_PEAK * bump;
        let p_correct = P_EARLY + (P_LATE - P_EARLY) * progress;
        Self {
            progress,
            bump,
            p_correct,
            paired_share: bump.min(max_paired_share(p_correct, window)),
            fragment_pool: pool.round() as usize,
        }
    }

    /// Index of dispersion of the correct-word count implied by the schedule.
    pub fn correct_dispersion(&self, window: usize) -> f64 {
        mixture_dispersion(self.paired_share, self.p_correct, window)
    }
}

/// Dispersion of the correct count when a share `m` of windows draws
/// `2 * Binomial(W / 2, p)` and the rest draw `Binomial(W, p)`.
fn mixture_dispersion(m: f64, p: f64, window: usize) -> f64 {
    let w = window as f64;
    let h = (window / 2) as f64;
    let (mean_pair, var_pair) = (2.0 * h * p, 4.0 * h * p * (1.0 - p));
    let (mean_full, var_full) = (w * p, w * p * (1.0 - p));
    let mean = m * mean_pair + (1.0 - m) * mean_full;
    let var = m * var_pair + (1.0 - m) * var_full + m * (1.0 - m) * (mean_pair - mean_full).powi(2);
    if mean > 0.0 {
        var / mean
    } else {
        0.0
    }
}

/// Largest pairing share that keeps the correct-count dispersion at or below
/// one, so the approach to the transition is a return toward Poisson rather
/// than an overshoot.
fn max_paired_share(p: f64, window: usize) -> f64 {
    if mixture_dispersion(1.0, p, window) <= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mixture_dispersion(mid, p, window) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Per-checkpoint text samples from the consolidation simulator, for
/// checkpoints `0..length`.
///
/// Before the transition most words are fragments drawn from a small pool,
/// so incorrect counts are tightly clustered and correct words are sparse
/// and near-Poisson. Around `t_star` the fragment pool proliferates and the
/// correct counts are drawn on an even lattice (words arrive in pairs), which
/// returns the dispersion to one while the distribution shape departs from
/// Poisson. Afterwards long words dominate with regular counts and residual
/// errors are sparse.
pub fn generate_consolidation_run(spec: &SyntheticSpec) -> Result<Vec<String>> {
    spec.validate()?;
    let SyntheticKind::Consolidation(c) = &spec.kind else {
        return Err(Error::InvalidSpec("not a consolidation spec".into()));
    };
    let max_pool = (POOL_EARLY + POOL_LATE + POOL_PEAK).ceil() as usize;
    let wrong = incorrect_forms(&c.vocab, max_pool);
    let short: Vec<&str> = c
        .vocab
        .iter()
        .map(String::as_str)
        .filter(|w| w.chars().count() <= 2)
        .collect();
    let long: Vec<&str> = c
        .vocab
        .iter()
        .map(String::as_str)
        .filter(|w| w.chars().count() >= 3)
        .collect();
    let short = if short.is_empty() {
        long.clone()
    } else {
        short
    };
    let w = spec.window_size;

    (0..spec.length)
        .map(|checkpoint| {
            let sched = Schedule::at(c, checkpoint as f64, w);
            let mut rng = stream_rng(spec.seed, "synth/consolidation", checkpoint as u64);
            let full = Binomial::new(w as u64, sched.p_correct)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let paired = Binomial::new((w / 2) as u64, sched.p_correct)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let pool = &wrong[..sched.fragment_pool.clamp(1, wrong.len())];

            let mut text = String::new();
            for win in 0..c.windows_per_sample {
                let k = if rng.random_bool(sched.paired_share) {
                    2 * paired.sample(&mut rng) as usize
                } else {
                    full.sample(&mut rng) as usize
                };
                for (i, label) in window_labels(k, w, &mut rng).into_iter().enumerate() {
                    let word = match label {
                        Label::Correct if rng.random_bool(LONG_WORD_SHARE * sched.progress) => {
                            long[rng.random_range(0..long.len())]
                        }
                        Label::Correct => short[rng.random_range(0..short.len())],
                        Label::Incorrect => pool[rng.random_range(0..pool.len())].as_str(),
                    };
                    if win > 0 || i > 0 {
                        text.push(if i == 0 { '\n' } else { ' ' });
                    }
                    text.push_str(word);
                }
            }
            Ok(text)
        })
        .collect()
}

/// Generates a consolidation run and computes the metrics of every
/// checkpoint against the generator's own vocabulary.
pub fn consolidation_metrics(
    spec: &SyntheticSpec,
    stats_cfg: StatsConfig,
    lex: &LexConfig,
) -> Result<Vec<CheckpointMetrics>> {
    let bundle = spec.bundle()?;
    generate_consolidation_run(spec)?
        .iter()
        .enumerate()
        .map(|(checkpoint, text)| {
            let source = StreamSource {
                seed: spec.seed,
                checkpoint: checkpoint as u64,
            };
            CheckpointMetrics::compute(&label_stream(text, &bundle, source), stats_cfg, lex)
        })
        .collect()
}
