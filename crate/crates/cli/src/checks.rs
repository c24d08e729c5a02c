//! Qualitative shape checks for a long run: properties of the pooled series
//! rather than numeric targets.

use lexphase_core::detector::{detect_peak, TransitionReport};
use serde::Serialize;

use crate::error::Result;
use crate::metrics::PooledRecord;
use crate::pipeline::pooled_series;

/// Length of the early and late segments, as a fraction of the run.
pub const EDGE_FRACTION: f64 = 0.05;
/// The late incorrect vocabulary must fall to at most this share of its peak.
pub const COLLAPSE_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn edge_means(pooled: &[PooledRecord], metric: &str) -> (Option<f64>, Option<f64>) {
    let vals: Vec<f64> = pooled
        .iter()
        .filter_map(|p| p.scalar(metric).and_then(|s| s.mean))
        .collect();
    if vals.is_empty() {
        return (None, None);
    }
    let k = ((vals.len() as f64 * EDGE_FRACTION).round() as usize).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (Some(mean(&vals[..k])), Some(mean(&vals[vals.len() - k..])))
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v:.3}"))
}

pub fn shape_checks(
    pooled: &[PooledRecord],
    report: Option<&TransitionReport>,
) -> Result<Vec<ShapeCheck>> {
    let mut checks = Vec::new();

    let (early, late) = edge_means(pooled, "mean_len");
    checks.push(ShapeCheck {
        name: "mean correct-word length rises from about 1.5 to about 2.5",
        passed: matches!((early, late), (Some(e), Some(l))
            if (1.0..=1.9).contains(&e) && (2.1..=2.9).contains(&l)),
        detail: format!(
            "early {} (want 1.0..1.9), late {} (want 2.1..2.9)",
            fmt(early),
            fmt(late)
        ),
    });

    let series = pooled_series(pooled, "V_uniq_incorrect")?;
    let (_, late) = edge_means(pooled, "V_uniq_incorrect");
    let (passed, detail) = match detect_peak(&series, 2) {
        Ok(peak) => {
            let collapsed = late.is_some_and(|l| l <= COLLAPSE_RATIO * peak.value);
            (
                peak.interior && collapsed,
                format!(
                    "smoothed peak {:.1} at checkpoint {} ({}), late mean {}",
                    peak.value,
                    peak.checkpoint,
                    if peak.interior {
                        "interior"
                    } else {
                        "at an edge"
                    },
                    fmt(late)
                ),
            )
        }
        Err(e) => (false, e.to_string()),
    };
    checks.push(ShapeCheck {
        name: "incorrect vocabulary peaks inside the run, then declines",
        passed,
        detail,
    });

    let (_, late) = edge_means(pooled, "D_correct");
    checks.push(ShapeCheck {
        name: "D_correct ends below 1",
        passed: late.is_some_and(|l| l < 1.0),
        detail: format!("late mean {}", fmt(late)),
    });

    let (_, late) = edge_means(pooled, "D_incorrect");
    checks.push(ShapeCheck {
        name: "D_incorrect ends within [0.85, 1.15]",
        passed: late.is_some_and(|l| (0.85..=1.15).contains(&l)),
        detail: format!("late mean {}", fmt(late)),
    });

    let band = report.and_then(|r| r.sync_band.as_ref());
    checks.push(ShapeCheck {
        name: "detector finds a synchronization band",
        passed: band.is_some(),
        detail: band.map_or_else(
            || "no band".into(),
            |b| {
                format!(
                    "[{:.1}, {:.1}] with {}",
                    b.start,
                    b.end,
                    b.members.join(", ")
                )
            },
        ),
    });
    Ok(checks)
}
