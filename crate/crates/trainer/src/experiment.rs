//! Multi-seed training runs with per-checkpoint samples, loss logs and
//! resumable snapshots.
//!
//! Output layout under the run directory:
//!
//! ```text
//! manifest.json
//! loss.jsonl                     merged {seed, checkpoint, train_loss, val_loss}
//! samples/seed{S}/ckpt{C}.txt
//! snapshots/seed{S}.pscp         latest state of each seed
//! logs/seed{S}.jsonl             per-seed loss records, rewritten each checkpoint
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use lexphase_core::manifest::{
    self, config_digest, config_hash, file_sha256, write_atomic, CorpusRef,
};
use lexphase_core::rng::{derive_seed, stream_rng};
use lexphase_core::{CorpusBundle, RunManifest, SampleRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, TrainConfig};
use crate::data::{TokenSplit, Tokenizer};
use crate::decode::{generate, KvDecoder};
use crate::error::{Error, Result};
use crate::model::{Model, Workspace};
use crate::optim::{AdamW, TrainState};
use crate::snapshot::Snapshot;

pub const LOSS_FILE: &str = "loss.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub seed: u64,
    pub checkpoint: u64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Seeds trained concurrently.
    pub jobs: usize,
    /// Stop every seed after this checkpoint, as if the process were killed.
    pub stop_after: Option<u64>,
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            stop_after: None,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Complete(Box<RunManifest>),
    Stopped { after_checkpoint: u64 },
}

pub fn sample_path(seed: u64, checkpoint: u64) -> PathBuf {
    PathBuf::from(format!("samples/seed{seed}/ckpt{checkpoint}.txt"))
}

fn snapshot_path(seed: u64) -> PathBuf {
    PathBuf::from(format!("snapshots/seed{seed}.pscp"))
}

fn log_path(seed: u64) -> PathBuf {
    PathBuf::from(format!("logs/seed{seed}.jsonl"))
}

/// Seed of the decoding RNG for one checkpoint sample.
pub fn sample_seed(seed: u64, checkpoint: u64) -> u64 {
    let d = derive_seed(seed, "trainer/sample", checkpoint);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Everything shared by the per-seed workers.
struct Plan<'a> {
    model: ModelConfig,
    train: &'a TrainConfig,
    tokenizer: Tokenizer,
    train_split: TokenSplit,
    val_split: TokenSplit,
    digest: [u8; 32],
    outdir: &'a Path,
    opts: &'a RunOptions,
}

/// Trains every seed, writing samples and logs as it goes, and returns the
/// manifest. Existing snapshots in `outdir` are resumed.
pub fn run_experiment(
    corpus: &CorpusBundle,
    model: &ModelConfig,
    train: &TrainConfig,
    outdir: &Path,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    train.validate()?;
    let tokenizer = Tokenizer::from_bundle(corpus);
    let mut model = model.clone();
    if model.vocab_size == 0 {
        model.vocab_size = tokenizer.vocab_size();
    } else if model.vocab_size != tokenizer.vocab_size() {
        return Err(Error::InvalidModel(format!(
            "vocab_size {} does not match the corpus alphabet of {}",
            model.vocab_size,
            tokenizer.vocab_size()
        )));
    }
    model.validate()?;
    tokenizer.encode(&train.prompt)?;

    let t = model.context_len;
    let train_split = TokenSplit::new("train", tokenizer.encode(corpus.train_text())?, t)?;
    let val_split = TokenSplit::new("validation", tokenizer.encode(corpus.val_text())?, t)?;

    // Snapshots stay valid when only the seed list or run length changes.
    let trajectory = TrainConfig {
        seeds: Vec::new(),
        total_checkpoints: 0,
        ..train.clone()
    };
    let digest = config_digest(&(&model, &trajectory, corpus.sha256()))?;

    let plan = Plan {
        model: model.clone(),
        train,
        tokenizer,
        train_split,
        val_split,
        digest,
        outdir,
        opts,
    };
    let jobs = opts.jobs.max(1);
    let results: Vec<Result<Vec<LossRecord>>> = if jobs == 1 {
        train.seeds.iter().map(|&s| run_seed(&plan, s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidTrain(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| {
            train
                .seeds
                .par_iter()
                .map(|&s| run_seed(&plan, s))
                .collect()
        })
    };
    let mut losses = Vec::new();
    for r in results {
        losses.extend(r?);
    }

    if let Some(k) = opts.stop_after.filter(|&k| k < train.total_checkpoints) {
        return Ok(RunOutcome::Stopped {
            after_checkpoint: k,
        });
    }

    let mut lines = String::new();
    for rec in &losses {
        lines.push_str(&serde_json::to_string(rec)?);
        lines.push('\n');
    }
    write_atomic(outdir.join(LOSS_FILE), lines.as_bytes())?;

    let manifest = build_manifest(corpus, &model, train, outdir)?;
    manifest.save(outdir)?;
    Ok(RunOutcome::Complete(Box::new(manifest)))
}

fn build_manifest(
    corpus: &CorpusBundle,
    model: &ModelConfig,
    train: &TrainConfig,
    outdir: &Path,
) -> Result<RunManifest> {
    let config = ExperimentConfig {
        model: model.clone(),
        train: train.clone(),
    };
    let corpus_path = match corpus.source() {
        Some(p) => fs::canonicalize(p).map_err(Error::io(p))?,
        None => {
            write_atomic(outdir.join("corpus.txt"), corpus.text().as_bytes())?;
            PathBuf::from("corpus.txt")
        }
    };
    let checkpoints: Vec<u64> = (0..=train.total_checkpoints).collect();
    let mut samples = Vec::new();
    for &seed in &train.seeds {
        for &c in &checkpoints {
            let path = sample_path(seed, c);
            samples.push(SampleRecord {
                seed,
                checkpoint: c,
                sha256: file_sha256(outdir.join(&path))?,
                path,
                sample_seed: train.decode.is_stochastic().then(|| sample_seed(seed, c)),
            });
        }
    }
    Ok(RunManifest {
        kind: "train".into(),
        config: serde_json::to_value(&config)?,
        config_hash: config_hash(&config)?,
        corpus: CorpusRef {
            path: corpus_path,
            sha256: corpus.sha256(),
        },
        seeds: train.seeds.clone(),
        checkpoints,
        samples,
        loss_log: Some(PathBuf::from(LOSS_FILE)),
        snapshots: train.seeds.iter().map(|&s| snapshot_path(s)).collect(),
    })
}

fn read_log(path: &Path) -> Result<Vec<LossRecord>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => {
            return Err(Error::Io {
                path: path.into(),
                source: e,
            })
        }
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn eval_loss(
    state: &TrainState,
    ws: &mut Workspace<f32>,
    split: &TokenSplit,
    seed: u64,
    cfg: &TrainConfig,
) -> f64 {
    let (b, t) = (ws.batch(), ws.seq_len());
    let purpose = format!("trainer/eval-{}", split.name());
    let total: f64 = (0..cfg.eval_batches as u64)
        .map(|i| {
            let batch = split.batch(b, t, seed, &purpose, i);
            state
                .model
                .forward(ws, &batch.inputs, Some(&batch.targets))
                .expect("targets given") as f64
        })
        .sum();
    total / cfg.eval_batches as f64
}

fn run_seed(plan: &Plan, seed: u64) -> Result<Vec<LossRecord>> {
    let cfg = plan.train;
    let dir = plan.outdir;
    let snap_file = dir.join(snapshot_path(seed));
    let log_file = dir.join(log_path(seed));

    let (mut state, start, mut records) = if snap_file.exists() {
        let snap = Snapshot::load(&snap_file, &plan.model, &plan.digest)?;
        let mut records = read_log(&log_file)?;
        records.retain(|r| r.checkpoint <= snap.checkpoint);
        (snap.state, snap.checkpoint + 1, records)
    } else {
        (
            TrainState::new(Model::new(&plan.model, seed)?),
            0,
            Vec::new(),
        )
    };

    let opt = AdamW::from_config(cfg);
    let t = plan.model.context_len;
    let mut ws = Workspace::new(&plan.model, cfg.batch_size, t);
    for c in start..=cfg.total_checkpoints {
        if c > 0 {
            for _ in 0..cfg.updates_per_checkpoint {
                let batch = plan.train_split.batch(
                    cfg.batch_size,
                    t,
                    seed,
                    "trainer/batch",
                    state.update_counter,
                );
                state.step(&mut ws, &batch, &opt)?;
            }
        }
        let rec = LossRecord {
            seed,
            checkpoint: c,
            train_loss: eval_loss(&state, &mut ws, &plan.train_split, seed, cfg),
            val_loss: eval_loss(&state, &mut ws, &plan.val_split, seed, cfg),
        };

        let mut rng = stream_rng(sample_seed(seed, c), "trainer/decode", 0);
        let mut decoder = KvDecoder::new(&state.model);
        let text = generate(
            &mut decoder,
            &plan.tokenizer,
            &cfg.prompt,
            cfg.sample_tokens,
            cfg.decode,
            &mut rng,
        )?;
        write_atomic(dir.join(sample_path(seed, c)), text.as_bytes())?;

        if plan.opts.verbose {
            eprintln!(
                "seed {seed} checkpoint {c}/{}: train {:.4} val {:.4}",
                cfg.total_checkpoints, rec.train_loss, rec.val_loss
            );
        }
        records.push(rec);
        let mut lines = String::new();
        for r in &records {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        write_atomic(&log_file, lines.as_bytes())?;
        Snapshot {
            config_digest: plan.digest,
            seed,
            checkpoint: c,
            state: state.clone(),
        }
        .save(&snap_file)?;

        if plan.opts.stop_after == Some(c) {
            break;
        }
    }
    Ok(records)
}

/// Reads the merged loss log of a finished run.
pub fn read_losses(run_dir: &Path) -> Result<Vec<LossRecord>> {
    read_log(&run_dir.join(LOSS_FILE))
}

/// Hex config hash of a finished run's manifest, recomputed from disk.
pub fn manifest_digest(run_dir: &Path) -> Result<String> {
    Ok(file_sha256(run_dir.join(manifest::MANIFEST_FILE))?)
}
