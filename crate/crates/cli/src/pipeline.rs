//! The stages behind the subcommands. Each reads and writes files in a run
//! directory so stages can be rerun independently.

use std::fs;
use std::path::{Path, PathBuf};

use lexphase_core::corpus::{load_corpus, DEFAULT_VAL_FRACTION};
use lexphase_core::detector::{DetectorConfig, MetricSeries, SeriesPoint, TransitionReport};
use lexphase_core::lexmetrics::{CheckpointMetrics, LexConfig};
use lexphase_core::manifest::{
    bytes_sha256, config_hash, write_atomic, CorpusRef, RunManifest, SampleRecord,
};
use lexphase_core::segmenter::{label_stream, StreamSource};
use lexphase_core::stats::StatsConfig;
use lexphase_core::synth::{
    generate_consolidation_run, generate_stream_sample, SyntheticKind, SyntheticSpec,
};
use lexphase_core::CorpusBundle;
use lexphase_trainer::experiment::sample_path;
use lexphase_trainer::{run_experiment, RunOptions, RunOutcome};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, SynthConfig};
use crate::error::{CliError, Result};
use crate::metrics::{ErrorRecord, MetricsFile, PooledRecord, SampleOutcome};

pub const TRANSITION_FILE: &str = "transition_report.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

/// Metrics the detector looks at by default.
pub const DETECT_METRICS: [&str; 7] = [
    "D_correct",
    "D_incorrect",
    "KL_correct",
    "KL_incorrect",
    "V_uniq_incorrect",
    "V_uniq_correct",
    "mean_len",
];

pub fn write_resolved_config(cfg: &Config, dir: &Path) -> Result<()> {
    write_atomic(dir.join(RESOLVED_CONFIG_FILE), cfg.to_toml()?.as_bytes())?;
    Ok(())
}

/// Trains every configured seed. `Ok(None)` means the run stopped early on
/// request and can be resumed.
pub fn train(cfg: &Config, stop_after: Option<u64>, verbose: bool) -> Result<Option<RunManifest>> {
    let path = cfg
        .corpus
        .path
        .as_ref()
        .ok_or_else(|| CliError::Usage("no corpus: set corpus.path or pass --corpus".into()))?;
    let corpus = load_corpus(path, cfg.corpus.val_fraction)?;
    let opts = RunOptions {
        jobs: cfg.run.jobs,
        stop_after,
        verbose,
    };
    fs::create_dir_all(&cfg.run.out_dir).map_err(CliError::io(&cfg.run.out_dir))?;
    write_resolved_config(cfg, &cfg.run.out_dir)?;
    match run_experiment(&corpus, &cfg.model, &cfg.train, &cfg.run.out_dir, &opts)? {
        RunOutcome::Complete(m) => Ok(Some(*m)),
        RunOutcome::Stopped { .. } => Ok(None),
    }
}

#[derive(Serialize)]
struct SynthRunConfig<'a> {
    synth: &'a SynthConfig,
    window_size: usize,
}

/// Writes a synthetic run in the trainer's layout: `corpus.txt`, one sample
/// file per seed and checkpoint, and a manifest of kind `"synth"`.
pub fn synth(cfg: &SynthConfig, stats: StatsConfig, out: &Path) -> Result<RunManifest> {
    if cfg.seeds.is_empty() || cfg.checkpoints == 0 {
        return Err(CliError::Usage(
            "synth needs at least one seed and one checkpoint".into(),
        ));
    }
    let consolidation = matches!(cfg.generator, SyntheticKind::Consolidation(_));
    let spec_for = |seed| SyntheticSpec {
        kind: cfg.generator.clone(),
        length: if consolidation {
            cfg.checkpoints
        } else {
            cfg.windows
        },
        window_size: stats.window_size,
        seed,
    };
    let first = spec_for(cfg.seeds[0]);
    first.validate()?;
    let bundle = first.bundle()?;
    write_atomic(out.join("corpus.txt"), bundle.text().as_bytes())?;

    let mut samples = Vec::new();
    for &seed in &cfg.seeds {
        let spec = spec_for(seed);
        let texts: Vec<String> = if consolidation {
            generate_consolidation_run(&spec)?
        } else {
            (0..cfg.checkpoints as u64)
                .map(|c| generate_stream_sample(&spec, c).map(|s| s.render()))
                .collect::<lexphase_core::Result<_>>()?
        };
        for (c, text) in texts.iter().enumerate() {
            let path = sample_path(seed, c as u64);
            write_atomic(out.join(&path), text.as_bytes())?;
            samples.push(SampleRecord {
                seed,
                checkpoint: c as u64,
                path,
                sha256: bytes_sha256(text.as_bytes()),
                sample_seed: None,
            });
        }
    }
    let config = serde_json::to_value(SynthRunConfig {
        synth: cfg,
        window_size: stats.window_size,
    })?;
    let manifest = RunManifest {
        kind: "synth".into(),
        config_hash: config_hash(&config)?,
        config,
        corpus: CorpusRef {
            path: PathBuf::from("corpus.txt"),
            sha256: bundle.sha256(),
        },
        seeds: cfg.seeds.clone(),
        checkpoints: (0..cfg.checkpoints as u64).collect(),
        samples,
        loss_log: None,
        snapshots: Vec::new(),
    };
    manifest.save(out)?;
    Ok(manifest)
}

fn load_run_corpus(manifest: &RunManifest, run_dir: &Path) -> Result<CorpusBundle> {
    let path = if manifest.corpus.path.is_relative() {
        run_dir.join(&manifest.corpus.path)
    } else {
        manifest.corpus.path.clone()
    };
    let bundle = load_corpus(&path, DEFAULT_VAL_FRACTION)?;
    if bundle.sha256() != manifest.corpus.sha256 {
        return Err(CliError::Data(format!(
            "corpus {} does not match the hash recorded in the manifest",
            path.display()
        )));
    }
    Ok(bundle)
}

fn analyze_sample(
    run_dir: &Path,
    rec: &SampleRecord,
    bundle: &CorpusBundle,
    stats: StatsConfig,
    lex: &LexConfig,
) -> SampleOutcome {
    let fail = |error: String| {
        SampleOutcome::Error(ErrorRecord {
            seed: rec.seed,
            checkpoint: rec.checkpoint,
            error,
        })
    };
    let path = run_dir.join(&rec.path);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) => return fail(format!("cannot read {}: {e}", rec.path.display())),
    };
    if bytes_sha256(&bytes) != rec.sha256 {
        return fail(format!(
            "{} does not match its recorded hash",
            rec.path.display()
        ));
    }
    let text = match String::from_utf8(bytes) {
        Ok(t) => t,
        Err(_) => return fail(format!("{} is not valid UTF-8", rec.path.display())),
    };
    let source = StreamSource {
        seed: rec.seed,
        checkpoint: rec.checkpoint,
    };
    match CheckpointMetrics::compute(&label_stream(&text, bundle, source), stats, lex) {
        Ok(m) => SampleOutcome::Metrics(Box::new(m)),
        Err(e) => fail(e.to_string()),
    }
}

/// Computes metrics for every sample of a run with `jobs` workers. Output
/// order depends only on `(seed, checkpoint)`.
pub fn analyze(
    run_dir: &Path,
    stats: StatsConfig,
    lex: &LexConfig,
    jobs: usize,
) -> Result<MetricsFile> {
    lexphase_core::lexmetrics::validate_chain(&lex.prefix_chain)?;
    let manifest = RunManifest::load(run_dir)?;
    let bundle = load_run_corpus(&manifest, run_dir)?;

    let mut items: Vec<SampleRecord> = manifest.samples.clone();
    for &seed in &manifest.seeds {
        for &c in &manifest.checkpoints {
            if manifest.sample(seed, c).is_none() {
                items.push(SampleRecord {
                    seed,
                    checkpoint: c,
                    path: sample_path(seed, c),
                    sha256: String::new(),
                    sample_seed: None,
                });
            }
        }
    }
    let work = |rec: &SampleRecord| {
        if rec.sha256.is_empty() {
            SampleOutcome::Error(ErrorRecord {
                seed: rec.seed,
                checkpoint: rec.checkpoint,
                error: "sample missing from the manifest".into(),
            })
        } else {
            analyze_sample(run_dir, rec, &bundle, stats, lex)
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(format!("cannot start {jobs} workers: {e}")))?;
    let outcomes: Vec<SampleOutcome> = pool.install(|| items.par_iter().map(work).collect());
    MetricsFile::from_samples(outcomes)
}

/// Series of one metric's pooled mean over checkpoints.
pub fn pooled_series(pooled: &[PooledRecord], name: &str) -> Result<MetricSeries> {
    let mut points: Vec<SeriesPoint> = pooled
        .iter()
        .map(|p| SeriesPoint {
            checkpoint: p.checkpoint,
            value: p.scalar(name).and_then(|s| s.mean),
        })
        .collect();
    points.sort_by_key(|p| p.checkpoint);
    Ok(MetricSeries::new(name, None, points)?)
}

/// Runs the detector over the pooled series of every metric with a rule.
pub fn detect(metrics: &MetricsFile, cfg: &DetectorConfig) -> Result<TransitionReport> {
    let series = cfg
        .rules
        .keys()
        .map(|name| pooled_series(&metrics.pooled, name))
        .collect::<Result<Vec<_>>>()?;
    Ok(lexphase_core::detector::detect_transition(&series, cfg)?)
}

pub fn write_transition(report: &TransitionReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn read_transition(path: &Path) -> Result<TransitionReport> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadRecord {
        path: path.to_path_buf(),
        line: e.line(),
        reason: e.to_string(),
    })
}
