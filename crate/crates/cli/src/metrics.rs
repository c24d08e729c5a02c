//! `metrics.jsonl`: one record per `(seed, checkpoint)` sample, record-level
//! error entries for samples that could not be analyzed, then one pooled
//! record per checkpoint with across-seed mean and sample standard deviation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lexphase_core::lexmetrics::{CheckpointMetrics, ClassStats};
use lexphase_core::manifest::write_atomic;
use lexphase_core::stats::CountHistogram;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const METRICS_FILE: &str = "metrics.jsonl";

/// Mean and sample standard deviation over the seeds where a value is
/// defined. `sd` needs at least two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values
            .into_iter()
            .flatten()
            .filter(|x| x.is_finite())
            .collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: None,
                sd: None,
                n,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = (n > 1).then(|| {
            let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Self {
            mean: Some(mean),
            sd,
            n,
        }
    }
}

/// Serializes as the string `"pooled"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PooledTag {
    #[default]
    #[serde(rename = "pooled")]
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledClass {
    pub lambda_hat: Stat,
    #[serde(rename = "D")]
    pub fano: Stat,
    #[serde(rename = "KL")]
    pub kl: Stat,
    /// Histogram of all windows of all seeds.
    pub n_windows: usize,
    pub pooled_lambda_hat: f64,
    pub pmf: Vec<f64>,
}

impl PooledClass {
    fn pool(classes: &[&ClassStats], window_size: usize) -> Result<Self> {
        let counts: Vec<u32> = classes
            .iter()
            .flat_map(|c| c.counts.iter().copied())
            .collect();
        let hist = CountHistogram::from_counts(counts, window_size)?;
        Ok(Self {
            lambda_hat: Stat::of(classes.iter().map(|c| Some(c.lambda_hat))),
            fano: Stat::of(classes.iter().map(|c| c.fano)),
            kl: Stat::of(classes.iter().map(|c| c.kl)),
            n_windows: hist.n_windows,
            pooled_lambda_hat: hist.lambda_hat,
            pmf: hist.pmf,
        })
    }

    pub fn histogram(&self, window_size: usize) -> CountHistogram {
        CountHistogram {
            window_size,
            counts_per_window: Vec::new(),
            pmf: self.pmf.clone(),
            lambda_hat: self.pooled_lambda_hat,
            n_windows: self.n_windows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledRecord {
    pub seed: PooledTag,
    pub checkpoint: u64,
    pub n_seeds: usize,
    #[serde(rename = "W")]
    pub window_size: usize,
    pub correct: PooledClass,
    pub incorrect: PooledClass,
    #[serde(rename = "V_uniq_correct")]
    pub v_uniq_correct: Stat,
    #[serde(rename = "V_uniq_incorrect")]
    pub v_uniq_incorrect: Stat,
    pub mean_len: Stat,
    pub n_correct: Stat,
    pub n_incorrect: Stat,
    pub prefix_counts: BTreeMap<String, Stat>,
}

impl PooledRecord {
    /// Pools per-seed records of one checkpoint.
    pub fn pool(records: &[&CheckpointMetrics]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| CliError::Internal("pooling an empty record set".into()))?;
        let (checkpoint, w) = (first.checkpoint, first.window_size);
        if records
            .iter()
            .any(|r| r.checkpoint != checkpoint || r.window_size != w)
        {
            return Err(CliError::Internal(
                "pooled records must share checkpoint and window size".into(),
            ));
        }
        let stat =
            |f: &dyn Fn(&CheckpointMetrics) -> Option<f64>| Stat::of(records.iter().map(|r| f(r)));
        let mut prefix_counts = BTreeMap::new();
        for word in first.prefix_counts.keys() {
            let s = stat(&|r| r.prefix_counts.get(word).map(|&c| c as f64));
            prefix_counts.insert(word.clone(), s);
        }
        let correct: Vec<&ClassStats> = records.iter().map(|r| &r.correct).collect();
        let incorrect: Vec<&ClassStats> = records.iter().map(|r| &r.incorrect).collect();
        Ok(Self {
            seed: PooledTag::Pooled,
            checkpoint,
            n_seeds: records.len(),
            window_size: w,
            correct: PooledClass::pool(&correct, w)?,
            incorrect: PooledClass::pool(&incorrect, w)?,
            v_uniq_correct: stat(&|r| Some(r.v_uniq_correct as f64)),
            v_uniq_incorrect: stat(&|r| Some(r.v_uniq_incorrect as f64)),
            mean_len: stat(&|r| r.mean_len),
            n_correct: stat(&|r| Some(r.n_correct as f64)),
            n_incorrect: stat(&|r| Some(r.n_incorrect as f64)),
            prefix_counts,
        })
    }

    /// Same names as [`CheckpointMetrics::scalar`].
    pub fn scalar(&self, name: &str) -> Option<Stat> {
        Some(match name {
            "D_correct" => self.correct.fano,
            "D_incorrect" => self.incorrect.fano,
            "KL_correct" => self.correct.kl,
            "KL_incorrect" => self.incorrect.kl,
            "lambda_correct" => self.correct.lambda_hat,
            "lambda_incorrect" => self.incorrect.lambda_hat,
            "V_uniq_correct" => self.v_uniq_correct,
            "V_uniq_incorrect" => self.v_uniq_incorrect,
            "mean_len" => self.mean_len,
            "n_correct" => self.n_correct,
            "n_incorrect" => self.n_incorrect,
            other => *self.prefix_counts.get(other.strip_prefix("prefix:")?)?,
        })
    }
}

/// A sample that could not be analyzed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub seed: u64,
    pub checkpoint: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleOutcome {
    Metrics(Box<CheckpointMetrics>),
    Error(ErrorRecord),
}

impl SampleOutcome {
    fn key(&self) -> (u64, u64) {
        match self {
            SampleOutcome::Metrics(m) => (m.seed, m.checkpoint),
            SampleOutcome::Error(e) => (e.seed, e.checkpoint),
        }
    }
}

/// Contents of a metrics file, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsFile {
    pub samples: Vec<SampleOutcome>,
    pub pooled: Vec<PooledRecord>,
}

impl MetricsFile {
    /// Sorts samples by `(seed, checkpoint)` and pools the successful ones
    /// per checkpoint.
    pub fn from_samples(mut samples: Vec<SampleOutcome>) -> Result<Self> {
        samples.sort_by_key(SampleOutcome::key);
        let mut by_ckpt: BTreeMap<u64, Vec<&CheckpointMetrics>> = BTreeMap::new();
        for s in &samples {
            if let SampleOutcome::Metrics(m) = s {
                by_ckpt.entry(m.checkpoint).or_default().push(m);
            }
        }
        let pooled = by_ckpt
            .values()
            .map(|rs| PooledRecord::pool(rs))
            .collect::<Result<_>>()?;
        Ok(Self { samples, pooled })
    }

    pub fn metrics(&self) -> impl Iterator<Item = &CheckpointMetrics> {
        self.samples.iter().filter_map(|s| match s {
            SampleOutcome::Metrics(m) => Some(m.as_ref()),
            SampleOutcome::Error(_) => None,
        })
    }

    pub fn errors(&self) -> impl Iterator<Item = &ErrorRecord> {
        self.samples.iter().filter_map(|s| match s {
            SampleOutcome::Error(e) => Some(e),
            SampleOutcome::Metrics(_) => None,
        })
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.samples.iter().map(|s| s.key().0).collect();
        s.dedup();
        s
    }

    pub fn checkpoints(&self) -> Vec<u64> {
        self.pooled.iter().map(|p| p.checkpoint).collect()
    }

    pub fn window_size(&self) -> Option<usize> {
        self.pooled.first().map(|p| p.window_size)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&match s {
                SampleOutcome::Metrics(m) => serde_json::to_string(m)?,
                SampleOutcome::Error(e) => serde_json::to_string(e)?,
            });
            out.push('\n');
        }
        for p in &self.pooled {
            out.push_str(&serde_json::to_string(p)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut file = MetricsFile::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| CliError::BadRecord {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if value.get("seed").and_then(|s| s.as_str()) == Some("pooled") {
                file.pooled
                    .push(serde_json::from_value(value).map_err(|e| bad(e.to_string()))?);
            } else if value.get("error").is_some() {
                file.samples.push(SampleOutcome::Error(
                    serde_json::from_value(value).map_err(|e| bad(e.to_string()))?,
                ));
            } else {
                file.samples.push(SampleOutcome::Metrics(
                    serde_json::from_value(value).map_err(|e| bad(e.to_string()))?,
                ));
            }
        }
        Ok(file)
    }
}
