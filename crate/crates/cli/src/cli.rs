//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lexphase_core::manifest::{RunManifest, MANIFEST_FILE};

use crate::config::{Config, Source};
use crate::error::{CliError, Result, EXIT_OK, EXIT_USAGE};
use crate::metrics::{MetricsFile, METRICS_FILE};
use crate::pipeline::{self, TRANSITION_FILE};
use crate::report::{write_report, ReportInputs};

#[derive(Debug, Parser)]
#[command(
    name = "lexphase",
    version,
    about = "Poisson-centered diagnostics for text sampled during language-model training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML config file; built-in defaults apply without one.
    #[arg(short, long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.batch_size=16`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Run directory (overrides run.out_dir).
    #[arg(short, long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides run.jobs).
    #[arg(short, long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourceFlags {
    /// Training corpus (overrides corpus.path).
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    /// Comma-separated seed list (overrides train.seeds and synth.seeds).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Stop training after this checkpoint; rerunning resumes.
    #[arg(long, value_name = "CHECKPOINT")]
    pub stop_after: Option<u64>,
    /// No per-checkpoint progress on stderr.
    #[arg(short, long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train every seed, sampling text at each checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SourceFlags,
    },
    /// Write a synthetic run in the same layout as a training run.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Comma-separated seed list (overrides synth.seeds).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Compute per-sample and pooled metrics into metrics.jsonl.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Window size in words (overrides stats.window_size).
        #[arg(long)]
        window: Option<usize>,
    },
    /// Locate the transition from pooled metrics.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Metrics file (default: metrics.jsonl in the run directory).
        #[arg(long, value_name = "FILE")]
        metrics: Option<PathBuf>,
        /// Synchronization tolerance in checkpoints.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Render CSV, SVG and markdown from metrics and the transition report.
    Report {
        #[command(flatten)]
        common: Common,
        /// Metrics file (default: metrics.jsonl in the run directory).
        #[arg(long, value_name = "FILE")]
        metrics: Option<PathBuf>,
        /// Transition report (default: next to the metrics file).
        #[arg(long, value_name = "FILE")]
        transition: Option<PathBuf>,
        /// Output directory (default: `report` next to the metrics file).
        #[arg(long, value_name = "DIR")]
        report_dir: Option<PathBuf>,
    },
    /// Produce samples (training or synthetic), then analyze, detect and report.
    All {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SourceFlags,
        /// Use the synthetic generator regardless of run.source.
        #[arg(long)]
        synth: bool,
        /// Window size in words (overrides stats.window_size).
        #[arg(long)]
        window: Option<usize>,
        /// Synchronization tolerance in checkpoints.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = Config::load(common.config.as_deref(), &common.set)?;
    if let Some(out) = &common.out {
        cfg.run.out_dir = out.clone();
    }
    if let Some(j) = common.jobs {
        cfg.run.jobs = j;
    }
    Ok(cfg)
}

fn apply_source(cfg: &mut Config, f: &SourceFlags) {
    if let Some(c) = &f.corpus {
        cfg.corpus.path = Some(c.clone());
    }
    if let Some(s) = &f.seeds {
        cfg.train.seeds = s.clone();
        cfg.synth.seeds = s.clone();
    }
}

fn synth_stage(cfg: &Config) -> Result<()> {
    let out = &cfg.run.out_dir;
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    pipeline::write_resolved_config(cfg, out)?;
    let m = pipeline::synth(&cfg.synth, cfg.stats, out)?;
    println!(
        "synthesized {} samples ({} seeds x {} checkpoints) in {}",
        m.samples.len(),
        m.seeds.len(),
        m.checkpoints.len(),
        out.display()
    );
    Ok(())
}

/// Returns false when training stopped early.
fn train_stage(cfg: &Config, f: &SourceFlags) -> Result<bool> {
    match pipeline::train(cfg, f.stop_after, !f.quiet)? {
        Some(m) => {
            println!(
                "trained {} seeds, {} samples in {}",
                m.seeds.len(),
                m.samples.len(),
                cfg.run.out_dir.display()
            );
            Ok(true)
        }
        None => {
            println!(
                "stopped after checkpoint {}; rerun the same command to resume",
                f.stop_after.unwrap_or_default()
            );
            Ok(false)
        }
    }
}

fn analyze_stage(cfg: &Config) -> Result<MetricsFile> {
    let run = &cfg.run.out_dir;
    let metrics = pipeline::analyze(run, cfg.stats, &cfg.lex, cfg.run.jobs)?;
    let path = run.join(METRICS_FILE);
    metrics.write(&path)?;
    let failed = metrics.errors().count();
    for e in metrics.errors() {
        eprintln!("seed {} checkpoint {}: {}", e.seed, e.checkpoint, e.error);
    }
    println!(
        "analyzed {} samples ({failed} failed) into {}",
        metrics.metrics().count(),
        path.display()
    );
    Ok(metrics)
}

fn detect_stage(
    cfg: &Config,
    metrics: &MetricsFile,
    dir: &Path,
) -> Result<lexphase_core::detector::TransitionReport> {
    let report = pipeline::detect(metrics, &cfg.detector)?;
    let path = dir.join(TRANSITION_FILE);
    pipeline::write_transition(&report, &path)?;
    match &report.sync_band {
        Some(b) => println!(
            "transition band [{:.1}, {:.1}] ({}) written to {}",
            b.start,
            b.end,
            b.members.join(", "),
            path.display()
        ),
        None => println!(
            "no transition detected; report written to {}",
            path.display()
        ),
    }
    Ok(report)
}

fn artifact_status(run_dir: &Path) -> Option<std::result::Result<(), String>> {
    run_dir.join(MANIFEST_FILE).is_file().then(|| {
        RunManifest::load(run_dir)
            .and_then(|m| m.verify(run_dir))
            .map_err(|e| e.to_string())
    })
}

fn report_stage(
    cfg: &Config,
    metrics: &MetricsFile,
    transition: Option<&lexphase_core::detector::TransitionReport>,
    run_dir: &Path,
    outdir: &Path,
) -> Result<()> {
    let inputs = ReportInputs {
        metrics,
        transition,
        artifacts: artifact_status(run_dir),
    };
    let files = write_report(&inputs, &cfg.report, outdir)?;
    println!("report: {} files in {}", files.len(), outdir.display());
    Ok(())
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, source } => {
            let mut cfg = load_config(&common)?;
            apply_source(&mut cfg, &source);
            cfg.validate()?;
            train_stage(&cfg, &source)?;
        }
        Command::Synth { common, seeds } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = seeds {
                cfg.synth.seeds = s;
            }
            cfg.validate()?;
            synth_stage(&cfg)?;
        }
        Command::Analyze { common, window } => {
            let mut cfg = load_config(&common)?;
            if let Some(w) = window {
                cfg.stats.window_size = w;
            }
            cfg.validate()?;
            analyze_stage(&cfg)?;
        }
        Command::Detect {
            common,
            metrics,
            tolerance,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(t) = tolerance {
                cfg.detector.tolerance = t;
            }
            cfg.validate()?;
            let path = metrics.unwrap_or_else(|| cfg.run.out_dir.join(METRICS_FILE));
            let m = MetricsFile::read(&path)?;
            detect_stage(&cfg, &m, &parent_dir(&path))?;
        }
        Command::Report {
            common,
            metrics,
            transition,
            report_dir,
        } => {
            let cfg = load_config(&common)?;
            cfg.validate()?;
            let path = metrics.unwrap_or_else(|| cfg.run.out_dir.join(METRICS_FILE));
            let run_dir = parent_dir(&path);
            let m = MetricsFile::read(&path)?;
            let tpath = transition.unwrap_or_else(|| run_dir.join(TRANSITION_FILE));
            let t = if tpath.is_file() {
                Some(pipeline::read_transition(&tpath)?)
            } else {
                eprintln!(
                    "no transition report at {}; skipping its sections",
                    tpath.display()
                );
                None
            };
            let outdir = report_dir.unwrap_or_else(|| run_dir.join("report"));
            report_stage(&cfg, &m, t.as_ref(), &run_dir, &outdir)?;
        }
        Command::All {
            common,
            source,
            synth,
            window,
            tolerance,
        } => {
            let mut cfg = load_config(&common)?;
            apply_source(&mut cfg, &source);
            if synth {
                cfg.run.source = Source::Synth;
            }
            if let Some(w) = window {
                cfg.stats.window_size = w;
            }
            if let Some(t) = tolerance {
                cfg.detector.tolerance = t;
            }
            cfg.validate()?;
            match cfg.run.source {
                Source::Synth => synth_stage(&cfg)?,
                Source::Train => {
                    if !train_stage(&cfg, &source)? {
                        return Ok(());
                    }
                }
            }
            let run_dir = cfg.run.out_dir.clone();
            let metrics = analyze_stage(&cfg)?;
            // The report is still useful without a transition; the detection
            // error is returned afterwards.
            let detected = detect_stage(&cfg, &metrics, &run_dir);
            report_stage(
                &cfg,
                &metrics,
                detected.as_ref().ok(),
                &run_dir,
                &run_dir.join("report"),
            )?;
            detected?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs, reports errors on
/// stderr and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match run(cli) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
