//! The run configuration: one TOML document with a table per stage.
//!
//! Precedence, lowest first: built-in defaults, the config file, `--set`
//! overrides, dedicated command-line flags. A relative `corpus.path` is
//! resolved against the directory of the config file; `run.out_dir` is
//! relative to the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use lexphase_core::detector::DetectorConfig;
use lexphase_core::lexmetrics::LexConfig;
use lexphase_core::stats::StatsConfig;
use lexphase_core::synth::{ConsolidationSpec, SyntheticKind};
use lexphase_trainer::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Train,
    Synth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub out_dir: PathBuf,
    /// Worker threads for training seeds and for analysis.
    pub jobs: usize,
    /// What `all` uses to produce samples.
    pub source: Source,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("run"),
            jobs: 1,
            source: Source::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub path: Option<PathBuf>,
    pub val_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            path: None,
            val_fraction: lexphase_core::corpus::DEFAULT_VAL_FRACTION,
        }
    }
}

/// What the report draws. Unset lists are chosen from the data: every
/// scalar metric, and the first, last and band-center checkpoints.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub metrics: Option<Vec<String>>,
    pub histogram_checkpoints: Option<Vec<u64>>,
    pub top_words_checkpoints: Option<Vec<u64>>,
}

/// Synthetic runs. `checkpoints` counts samples per seed (indices
/// `0..checkpoints`); `windows` is the length of each stream sample and is
/// ignored by the consolidation generator, which has its own
/// `windows_per_sample`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seeds: Vec<u64>,
    pub checkpoints: usize,
    pub windows: usize,
    pub generator: SyntheticKind,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            checkpoints: 200,
            windows: 500,
            generator: SyntheticKind::Consolidation(ConsolidationSpec::new(100.0, 4.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub corpus: CorpusSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub stats: StatsConfig,
    pub lex: LexConfig,
    pub detector: DetectorConfig,
    pub report: ReportConfig,
    pub synth: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            run: RunSection::default(),
            corpus: CorpusSection::default(),
            model: ModelConfig::desk(0),
            train: TrainConfig::default(),
            stats: StatsConfig::default(),
            lex: LexConfig::default(),
            detector: DetectorConfig::default(),
            report: ReportConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Config {
    /// Loads `path` (or the defaults when `None`) and applies `KEY=VALUE`
    /// overrides, where `KEY` is a dotted path such as `train.batch_size`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config {
                    path: p.to_path_buf(),
                    reason: e.to_string(),
                })?;
                text.parse::<toml::Table>().map_err(|e| CliError::Config {
                    path: p.to_path_buf(),
                    reason: e.to_string(),
                })?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: Config =
            Config::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config {
                path: path.map_or_else(|| PathBuf::from("<defaults>"), Path::to_path_buf),
                reason: e.to_string(),
            })?;
        if let (Some(base), Some(corpus)) = (path.and_then(Path::parent), cfg.corpus.path.as_mut())
        {
            if corpus.is_relative() {
                *corpus = base.join(&*corpus);
            }
        }
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: PathBuf::from("<string>"),
            reason: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Internal(format!("cannot render config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.jobs == 0 {
            return Err(CliError::Usage("run.jobs must be at least 1".into()));
        }
        if self.stats.window_size == 0 {
            return Err(lexphase_core::Error::ZeroWindow.into());
        }
        lexphase_core::lexmetrics::validate_chain(&self.lex.prefix_chain)?;
        if self.detector.tolerance.is_nan() || self.detector.tolerance < 0.0 {
            return Err(CliError::Usage(
                "detector.tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {assignment:?} is not KEY=VALUE")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad override key {key:?}")));
    }
    // Anything that is not a TOML literal is taken as a bare string.
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));

    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override {key:?}: {p} is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(Config::parse_str("").unwrap(), Config::default());
    }

    #[test]
    fn overrides_win_and_parse_literals() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(
            &p,
            "[train]\nbatch_size = 4\n[corpus]\npath = \"text.txt\"\n",
        )
        .unwrap();
        let cfg = Config::load(
            Some(&p),
            &[
                "train.batch_size=8".into(),
                "train.seeds=[3, 4]".into(),
                "run.out_dir=out/x".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.train.batch_size, 8);
        assert_eq!(cfg.train.seeds, [3, 4]);
        assert_eq!(cfg.run.out_dir, PathBuf::from("out/x"));
        assert_eq!(cfg.corpus.path, Some(dir.path().join("text.txt")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse_str("[train]\nbatchsize = 3\n").is_err());
        assert!(Config::parse_str("[nope]\n").is_err());
        let err = Config::load(None, &["train".into()]).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }

    #[test]
    fn synth_generator_table() {
        let cfg = Config::parse_str(
            "[synth]\ncheckpoints = 50\n[synth.generator]\nkind = \"bernoulli_labels\"\np = 0.3\n",
        )
        .unwrap();
        assert_eq!(
            cfg.synth.generator,
            SyntheticKind::BernoulliLabels { p: 0.3 }
        );
        let cfg = Config::parse_str(
            "[synth.generator]\nkind = \"consolidation\"\nt_star = 80.0\nramp = 2.0\n",
        )
        .unwrap();
        let SyntheticKind::Consolidation(c) = cfg.synth.generator else {
            panic!("wrong kind")
        };
        assert_eq!(
            c,
            ConsolidationSpec {
                t_star: 80.0,
                ramp: 2.0,
                ..ConsolidationSpec::new(0.0, 0.0)
            }
        );
    }

    #[test]
    fn default_config_roundtrips_through_toml() {
        let cfg = Config::default();
        assert_eq!(Config::parse_str(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}
