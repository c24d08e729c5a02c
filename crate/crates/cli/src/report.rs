//! Report bundle: aggregate CSV and line plot per metric, count histograms,
//! top-word charts and a markdown summary. Missing optional inputs skip
//! their sections; nothing here is fatal except failing to write.
//!
//! CSV columns are fixed: `metric,checkpoint,mean,sd,n_seeds`. Empty cells
//! mean undefined (no seed had a value, or fewer than two for `sd`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lexphase_core::detector::{RegimeInterval, RegimeLabel, TransitionReport};
use lexphase_core::lexmetrics::SCALAR_METRICS;
use lexphase_core::manifest::write_atomic;
use lexphase_core::segmenter::Label;
use lexphase_core::stats::poisson_pmf;

use crate::checks::shape_checks;
use crate::config::ReportConfig;
use crate::error::Result;
use crate::metrics::{MetricsFile, PooledClass};
use crate::svg::{self, Bar, HistPanel, LineExtras, LinePoint, CORRECT_COLOR, INCORRECT_COLOR};

pub const SUMMARY_FILE: &str = "report.md";
pub const CSV_HEADER: [&str; 5] = ["metric", "checkpoint", "mean", "sd", "n_seeds"];

/// Everything the report is built from.
pub struct ReportInputs<'a> {
    pub metrics: &'a MetricsFile,
    pub transition: Option<&'a TransitionReport>,
    /// Result of checking the run manifest, when one was found.
    pub artifacts: Option<std::result::Result<(), String>>,
}

/// File-name form of a metric name: `prefix:you` becomes `prefix_you`.
pub fn file_stem(metric: &str) -> String {
    metric
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn num(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.digits$}"))
}

fn default_metrics(m: &MetricsFile) -> Vec<String> {
    let mut names: Vec<String> = SCALAR_METRICS.iter().map(|s| s.to_string()).collect();
    if let Some(p) = m.pooled.first() {
        names.extend(p.prefix_counts.keys().map(|w| format!("prefix:{w}")));
    }
    names
}

/// First, last and the checkpoint nearest the band center (or the run
/// middle without a band).
fn default_checkpoints(m: &MetricsFile, t: Option<&TransitionReport>) -> Vec<u64> {
    let ck = m.checkpoints();
    let (Some(&first), Some(&last)) = (ck.first(), ck.last()) else {
        return Vec::new();
    };
    let center = t
        .and_then(|t| t.sync_band.as_ref())
        .map_or((first + last) as f64 / 2.0, |b| (b.start + b.end) / 2.0);
    let mid = *ck
        .iter()
        .min_by(|a, b| {
            (**a as f64 - center)
                .abs()
                .total_cmp(&(**b as f64 - center).abs())
        })
        .expect("non-empty");
    let mut v = vec![first, mid, last];
    v.sort_unstable();
    v.dedup();
    v
}

/// Aggregate CSV of one metric over the pooled records.
pub fn csv_bytes(m: &MetricsFile, metric: &str) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for p in &m.pooled {
        let Some(s) = p.scalar(metric) else { continue };
        w.write_record([
            metric.to_string(),
            p.checkpoint.to_string(),
            cell(s.mean),
            cell(s.sd),
            s.n.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| crate::error::CliError::Internal(e.to_string()))
}

fn metric_plot(inputs: &ReportInputs, metric: &str) -> String {
    let points: Vec<LinePoint> = inputs
        .metrics
        .pooled
        .iter()
        .map(|p| {
            let s = p.scalar(metric);
            LinePoint {
                x: p.checkpoint as f64,
                mean: s.and_then(|s| s.mean),
                sd: s.and_then(|s| s.sd),
            }
        })
        .collect();
    let band = inputs
        .transition
        .and_then(|t| t.sync_band.as_ref())
        .map(|b| (b.start, b.end));
    let scurve = inputs
        .transition
        .and_then(|t| t.scurve)
        .filter(|_| metric == lexphase_core::detector::SCURVE_METRIC);
    let fit = scurve.map(|f| move |t: f64| f.eval(t));
    let extras = LineExtras {
        band,
        reference: metric.starts_with("D_").then_some(1.0),
        fit: fit.as_ref().map(|f| f as &dyn Fn(f64) -> f64),
    };
    let n = inputs.metrics.pooled.first().map_or(0, |p| p.n_seeds);
    svg::line_plot(
        &format!("{metric} (mean ± 1 sd over {n} seeds)"),
        metric,
        &points,
        &extras,
    )
}

fn baseline(pmf_len: usize, lambda: f64) -> Vec<f64> {
    (0..pmf_len)
        .map(|n| poisson_pmf(n as u32, lambda))
        .collect()
}

/// Side-by-side histogram of both classes. Each entry is
/// `(label, color, pmf, lambda_hat, n_windows)`.
pub fn histogram_svg(title: &str, classes: [(&str, &str, &[f64], f64, usize); 2]) -> String {
    let baselines: Vec<Vec<f64>> = classes
        .iter()
        .map(|(_, _, pmf, lambda, _)| baseline(pmf.len(), *lambda))
        .collect();
    let panels: Vec<HistPanel> = classes
        .iter()
        .zip(&baselines)
        .map(|((label, color, pmf, lambda, n), poisson)| HistPanel {
            label,
            color,
            pmf,
            poisson,
            lambda: *lambda,
            n_windows: *n,
        })
        .collect();
    svg::histogram(title, &panels)
}

fn pooled_panel(c: &PooledClass) -> (&[f64], f64, usize) {
    (&c.pmf, c.pooled_lambda_hat, c.n_windows)
}

/// Writes the bundle into `outdir` and returns the written paths relative
/// to it, in creation order.
pub fn write_report(
    inputs: &ReportInputs,
    cfg: &ReportConfig,
    outdir: &Path,
) -> Result<Vec<PathBuf>> {
    let m = inputs.metrics;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut emit = |rel: PathBuf, bytes: &[u8]| emit_file(outdir, &mut written, rel, bytes);

    let metrics = cfg.metrics.clone().unwrap_or_else(|| default_metrics(m));
    for metric in &metrics {
        let stem = file_stem(metric);
        emit(
            PathBuf::from("csv").join(format!("{stem}.csv")),
            &csv_bytes(m, metric)?,
        )?;
        emit(
            PathBuf::from("plots").join(format!("{stem}.svg")),
            metric_plot(inputs, metric).as_bytes(),
        )?;
    }

    let hist_ckpts = cfg
        .histogram_checkpoints
        .clone()
        .unwrap_or_else(|| default_checkpoints(m, inputs.transition));
    for &c in &hist_ckpts {
        if let Some(p) = m.pooled.iter().find(|p| p.checkpoint == c) {
            let (cp, cl, cn) = pooled_panel(&p.correct);
            let (ip, il, inn) = pooled_panel(&p.incorrect);
            let svg = histogram_svg(
                &format!(
                    "Counts per {}-word window, checkpoint {c}, {} seeds pooled",
                    p.window_size, p.n_seeds
                ),
                [
                    ("correct", CORRECT_COLOR, cp, cl, cn),
                    ("incorrect", INCORRECT_COLOR, ip, il, inn),
                ],
            );
            emit(
                PathBuf::from("histograms").join(format!("ckpt{c}_pooled.svg")),
                svg.as_bytes(),
            )?;
        }
        for r in m.metrics().filter(|r| r.checkpoint == c) {
            let svg = histogram_svg(
                &format!(
                    "Counts per {}-word window, checkpoint {c}, seed {}",
                    r.window_size, r.seed
                ),
                [
                    (
                        "correct",
                        CORRECT_COLOR,
                        &r.correct.pmf,
                        r.correct.lambda_hat,
                        r.correct.n_windows,
                    ),
                    (
                        "incorrect",
                        INCORRECT_COLOR,
                        &r.incorrect.pmf,
                        r.incorrect.lambda_hat,
                        r.incorrect.n_windows,
                    ),
                ],
            );
            emit(
                PathBuf::from("histograms").join(format!("ckpt{c}_seed{}.svg", r.seed)),
                svg.as_bytes(),
            )?;
        }
    }

    let top_ckpts = cfg
        .top_words_checkpoints
        .clone()
        .unwrap_or_else(|| default_checkpoints(m, inputs.transition));
    for &c in &top_ckpts {
        for r in m.metrics().filter(|r| r.checkpoint == c) {
            let bars: Vec<Bar> = r
                .top_words
                .iter()
                .map(|w| Bar {
                    label: &w.word,
                    value: w.count as f64,
                    correct: w.label == Label::Correct,
                })
                .collect();
            let svg = svg::bar_chart(
                &format!("Top {} words, checkpoint {c}, seed {}", bars.len(), r.seed),
                "occurrences",
                &bars,
            );
            emit(
                PathBuf::from("top_words").join(format!("ckpt{c}_seed{}.svg", r.seed)),
                svg.as_bytes(),
            )?;
        }
    }

    let summary = summary_markdown(inputs, &written)?;
    emit_file(
        outdir,
        &mut written,
        PathBuf::from(SUMMARY_FILE),
        summary.as_bytes(),
    )?;
    Ok(written)
}

fn emit_file(outdir: &Path, written: &mut Vec<PathBuf>, rel: PathBuf, bytes: &[u8]) -> Result<()> {
    write_atomic(outdir.join(&rel), bytes)?;
    written.push(rel);
    Ok(())
}

fn interval(r: &RegimeInterval) -> String {
    if r.empty {
        return "(empty)".into();
    }
    format!(
        "{}{}, {}{}",
        if r.start_closed { '[' } else { '(' },
        short(r.start),
        short(r.end),
        if r.end_closed { ']' } else { ')' }
    )
}

fn short(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn label_name(l: RegimeLabel) -> &'static str {
    match l {
        RegimeLabel::Before => "before",
        RegimeLabel::During => "during",
        RegimeLabel::After => "after",
        RegimeLabel::NoTransition => "no transition",
    }
}

fn regime_mean(m: &MetricsFile, r: &RegimeInterval, metric: &str) -> Option<f64> {
    let v: Vec<f64> = m
        .pooled
        .iter()
        .filter(|p| r.contains(p.checkpoint as f64))
        .filter_map(|p| p.scalar(metric).and_then(|s| s.mean))
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summary_markdown(inputs: &ReportInputs, files: &[PathBuf]) -> Result<String> {
    let m = inputs.metrics;
    let mut s = String::new();
    let seeds = m.seeds();
    let ck = m.checkpoints();
    let _ = writeln!(s, "# Transition report\n");
    let _ = writeln!(
        s,
        "- Seeds: {} ({})",
        seeds.len(),
        seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    );
    match (ck.first(), ck.last()) {
        (Some(a), Some(b)) => {
            let _ = writeln!(s, "- Checkpoints: {} ({a} to {b})", ck.len());
        }
        _ => {
            let _ = writeln!(s, "- Checkpoints: none");
        }
    }
    if let Some(w) = m.window_size() {
        let _ = writeln!(s, "- Window: {w} words");
    }
    let n_err = m.errors().count();
    let _ = writeln!(
        s,
        "- Samples analyzed: {}, failed: {n_err}",
        m.metrics().count()
    );
    match &inputs.artifacts {
        Some(Ok(())) => {
            let _ = writeln!(s, "- Artifacts: all files match the manifest");
        }
        Some(Err(e)) => {
            let _ = writeln!(s, "- Artifacts: {e}");
        }
        None => {}
    }
    for e in m.errors() {
        let _ = writeln!(
            s,
            "  - seed {} checkpoint {}: {}",
            e.seed, e.checkpoint, e.error
        );
    }

    match inputs.transition {
        None => {
            let _ = writeln!(s, "\nNo transition report was available.");
        }
        Some(t) => {
            let _ = writeln!(s, "\n## Transition\n");
            match &t.sync_band {
                Some(b) => {
                    let _ = writeln!(
                        s,
                        "Synchronization band: checkpoints {:.1} to {:.1} (width {:.1}), agreed by {}.",
                        b.start,
                        b.end,
                        b.width(),
                        b.members.join(", ")
                    );
                }
                None => {
                    let _ = writeln!(s, "No synchronized transition was detected.");
                }
            }
            let _ = writeln!(
                s,
                "\n| metric | rule | checkpoint | votes |\n|---|---|---|---|"
            );
            for (name, ev) in &t.per_metric_events {
                let rule = match ev.rule {
                    lexphase_core::detector::EventRule::Peak => "peak".to_string(),
                    lexphase_core::detector::EventRule::Inflection => "inflection".to_string(),
                    lexphase_core::detector::EventRule::Reversal { target } => {
                        format!("reversal toward {target}")
                    }
                };
                let _ = writeln!(
                    s,
                    "| {name} | {rule} | {:.1} | {} |",
                    ev.checkpoint,
                    if ev.interior {
                        "yes"
                    } else {
                        "no (edge or poor fit)"
                    }
                );
            }
            for (name, why) in &t.skipped {
                let _ = writeln!(s, "| {name} | skipped | n/a | {why} |");
            }

            let _ = writeln!(s, "\n## Regimes\n");
            let _ = writeln!(
                s,
                "| regime | checkpoints | D_correct | D_incorrect | KL_correct | mean_len | V_uniq_incorrect |\n|---|---|---|---|---|---|---|"
            );
            for r in &t.regimes.intervals {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    label_name(r.label),
                    interval(r),
                    num(regime_mean(m, r, "D_correct"), 3),
                    num(regime_mean(m, r, "D_incorrect"), 3),
                    num(regime_mean(m, r, "KL_correct"), 4),
                    num(regime_mean(m, r, "mean_len"), 3),
                    num(regime_mean(m, r, "V_uniq_incorrect"), 1),
                );
            }
            if t.regimes.degenerate {
                let _ = writeln!(
                    s,
                    "\nThe band touches an end of the run, so one regime is empty."
                );
            }

            if let Some(f) = &t.scurve {
                let _ = writeln!(s, "\n## Word-length S-curve\n");
                let _ = writeln!(
                    s,
                    "L0 = {:.3}, L1 = {:.3}, t0 = {:.1}, s = {:.4}, RMSE = {:.4}, R² = {:.3}",
                    f.lower, f.upper, f.t0, f.s, f.rmse, f.r2
                );
            }
        }
    }

    if m.pooled.len() >= lexphase_core::detector::MIN_DETECT_CHECKPOINTS {
        let _ = writeln!(s, "\n## Shape checks\n");
        let _ = writeln!(s, "| check | result | detail |\n|---|---|---|");
        for c in shape_checks(&m.pooled, inputs.transition)? {
            let _ = writeln!(
                s,
                "| {} | {} | {} |",
                c.name,
                if c.passed { "pass" } else { "fail" },
                c.detail
            );
        }
    }

    let _ = writeln!(s, "\n## Files\n");
    for f in files {
        let _ = writeln!(s, "- {}", f.display());
    }
    Ok(s)
}
