//! Transition detection over per-checkpoint metric series.
//!
//! Each metric contributes at most one event: a peak, a reversal toward a
//! reference level, or the center of a fitted logistic S-curve. Events that
//! cluster within a tolerance form the synchronization band, which then
//! splits the run into before/during/after regimes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub checkpoint: u64,
    pub value: Option<f64>,
}

/// A named metric over checkpoints. `seed == None` marks a pooled series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub seed: Option<u64>,
    points: Vec<SeriesPoint>,
}

impl MetricSeries {
    pub fn new(
        name: impl Into<String>,
        seed: Option<u64>,
        points: Vec<SeriesPoint>,
    ) -> Result<Self> {
        let name = name.into();
        if points
            .windows(2)
            .any(|w| w[0].checkpoint >= w[1].checkpoint)
        {
            return Err(Error::UnorderedSeries(name));
        }
        Ok(Self { name, seed, points })
    }

    /// Convenience constructor from fully defined `(checkpoint, value)` pairs.
    pub fn from_pairs(name: impl Into<String>, pairs: &[(u64, f64)]) -> Result<Self> {
        let points = pairs
            .iter()
            .map(|&(checkpoint, v)| SeriesPoint {
                checkpoint,
                value: Some(v),
            })
            .collect();
        Self::new(name, None, points)
    }

    pub fn points(&self) -> &[SeriesPoint] {
        &self.points
    }

    pub fn defined(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.points
            .iter()
            .filter_map(|p| p.value.filter(|v| v.is_finite()).map(|v| (p.checkpoint, v)))
    }

    pub fn n_defined(&self) -> usize {
        self.defined().count()
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.value).collect()
    }

    fn require(&self, needed: usize) -> Result<Vec<(u64, f64)>> {
        let d: Vec<_> = self.defined().collect();
        if d.len() < needed {
            return Err(Error::TooFewPoints {
                name: self.name.clone(),
                needed,
                got: d.len(),
            });
        }
        Ok(d)
    }
}

/// Centered moving average over point indices. Undefined points are skipped
/// when averaging and stay undefined; windows truncate at the ends.
pub fn smooth(series: &MetricSeries, half_width: usize) -> MetricSeries {
    if half_width == 0 {
        return series.clone();
    }
    let pts = &series.points;
    let points = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let value = p.value.and_then(|_| {
                let lo = i.saturating_sub(half_width);
                let hi = (i + half_width).min(pts.len() - 1);
                let (n, sum) = pts[lo..=hi]
                    .iter()
                    .filter_map(|q| q.value.filter(|v| v.is_finite()))
                    .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
                (n > 0).then(|| sum / n as f64)
            });
            SeriesPoint {
                checkpoint: p.checkpoint,
                value,
            }
        })
        .collect();
    MetricSeries {
        name: series.name.clone(),
        seed: series.seed,
        points,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEvent {
    pub checkpoint: u64,
    pub value: f64,
    /// False when the extremum sits on the first or last defined point.
    pub interior: bool,
}

pub const MIN_PEAK_POINTS: usize = 5;

/// Differences below this are rounding noise from smoothing, not signal.
fn tie_tolerance(values: impl Iterator<Item = f64>) -> f64 {
    1e-12 * values.fold(0.0f64, |m, v| m.max(v.abs()))
}
pub const MIN_SCURVE_POINTS: usize = 8;

/// Global maximum of the smoothed series; ties resolve to the earliest
/// checkpoint.
pub fn detect_peak(series: &MetricSeries, half_width: usize) -> Result<PeakEvent> {
    series.require(MIN_PEAK_POINTS)?;
    let d: Vec<_> = smooth(series, half_width).defined().collect();
    let eps = tie_tolerance(d.iter().map(|p| p.1));
    let (idx, &(checkpoint, value)) = d
        .iter()
        .enumerate()
        .fold(None::<(usize, &(u64, f64))>, |best, cur| match best {
            Some((_, b)) if cur.1 .1 <= b.1 + eps => best,
            _ => Some(cur),
        })
        .expect("at least MIN_PEAK_POINTS defined points");
    Ok(PeakEvent {
        checkpoint,
        value,
        interior: idx > 0 && idx + 1 < d.len(),
    })
}

/// The most prominent interior local minimum of `|y - target|` on the
/// smoothed series: a temporary return toward `target` that is flanked on
/// both sides by larger deviations. Prominence of a candidate is the
/// smaller of the largest deviations before and after it, minus its own.
pub fn detect_reversal(
    series: &MetricSeries,
    target: f64,
    half_width: usize,
) -> Result<Option<PeakEvent>> {
    series.require(MIN_PEAK_POINTS)?;
    let d: Vec<_> = smooth(series, half_width).defined().collect();
    let dev: Vec<f64> = d.iter().map(|&(_, v)| (v - target).abs()).collect();
    let n = dev.len();
    let eps = tie_tolerance(d.iter().map(|p| p.1).chain([target]));

    // running maxima from each side
    let mut left_max = vec![f64::NEG_INFINITY; n];
    let mut right_max = vec![f64::NEG_INFINITY; n];
    for i in 1..n {
        left_max[i] = left_max[i - 1].max(dev[i - 1]);
    }
    for i in (0..n - 1).rev() {
        right_max[i] = right_max[i + 1].max(dev[i + 1]);
    }

    let mut best: Option<(usize, f64)> = None;
    for i in 1..n - 1 {
        if dev[i] > dev[i - 1] || dev[i] > dev[i + 1] {
            continue;
        }
        let prominence = left_max[i].min(right_max[i]) - dev[i];
        if prominence <= eps {
            continue;
        }
        if best.is_none_or(|(_, p)| prominence > p + eps) {
            best = Some((i, prominence));
        }
    }
    Ok(best.map(|(i, _)| PeakEvent {
        checkpoint: d[i].0,
        value: d[i].1,
        interior: true,
    }))
}

/// Four-parameter logistic `L0 + (L1 - L0) / (1 + exp(-s (t - t0)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SCurveFit {
    #[serde(rename = "L0")]
    pub lower: f64,
    #[serde(rename = "L1")]
    pub upper: f64,
    pub t0: f64,
    pub s: f64,
    pub rmse: f64,
    /// Coefficient of determination of the fit.
    pub r2: f64,
}

impl SCurveFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.lower + (self.upper - self.lower) * logistic(self.s * (t - self.t0))
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const T0_GRID: usize = 121;
const S_GRID: usize = 40;

struct LogisticProblem {
    t: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
    sst: f64,
}

impl LogisticProblem {
    /// Residual sum of squares with the asymptotes solved in closed form
    /// for fixed center and steepness. Returns `(sse, L0, L1)`.
    fn profile(&self, t0: f64, s: f64) -> Option<(f64, f64, f64)> {
        let n = self.t.len() as f64;
        let g: Vec<f64> = self.t.iter().map(|&t| logistic(s * (t - t0))).collect();
        let g_mean = g.iter().sum::<f64>() / n;
        let (mut sgg, mut sgy) = (0.0, 0.0);
        for (gi, yi) in g.iter().zip(&self.y) {
            let dg = gi - g_mean;
            sgg += dg * dg;
            sgy += dg * (yi - self.y_mean);
        }
        if sgg <= 1e-18 * n {
            return None;
        }
        let b = sgy / sgg;
        let a = self.y_mean - b * g_mean;
        let sse = g
            .iter()
            .zip(&self.y)
            .map(|(gi, yi)| {
                let r = yi - (a + b * gi);
                r * r
            })
            .sum();
        Some((sse, a, a + b))
    }
}

/// Least-squares logistic fit by a deterministic grid over center and
/// log-steepness followed by coordinate refinement. The asymptotes are
/// solved exactly at every trial point.
pub fn fit_scurve(series: &MetricSeries) -> Result<SCurveFit> {
    let d = series.require(MIN_SCURVE_POINTS)?;
    let t: Vec<f64> = d.iter().map(|&(c, _)| c as f64).collect();
    let y: Vec<f64> = d.iter().map(|&(_, v)| v).collect();
    let n = y.len() as f64;

    let y_mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if scale == 0.0 || hi - lo <= 64.0 * f64::EPSILON * scale {
        return Err(Error::NoTransition(series.name.clone()));
    }

    let t_min = t[0];
    let t_max = t[t.len() - 1];
    let span = t_max - t_min;
    let min_dt = t
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let ls_lo = (1.0 / span).ln();
    let ls_hi = (50.0 / min_dt).ln();

    let problem = LogisticProblem { t, y, y_mean, sst };
    let eval = |t0: f64, ls: f64| problem.profile(t0, ls.exp());

    let mut best: Option<(f64, f64, f64)> = None; // (sse, t0, ln s)
    let t_step = span / (T0_GRID - 1) as f64;
    let ls_step = (ls_hi - ls_lo) / (S_GRID - 1) as f64;
    for i in 0..T0_GRID {
        let t0 = t_min + t_step * i as f64;
        for j in 0..S_GRID {
            let ls = ls_lo + ls_step * j as f64;
            if let Some((sse, _, _)) = eval(t0, ls) {
                if best.is_none_or(|b| sse < b.0) {
                    best = Some((sse, t0, ls));
                }
            }
        }
    }
    let (mut sse, mut t0, mut ls) = best.ok_or_else(|| Error::NoTransition(series.name.clone()))?;

    let (mut dt, mut dls) = (t_step, ls_step);
    for _ in 0..4000 {
        if dt < 1e-9 * span && dls < 1e-9 {
            break;
        }
        let mut improved = false;
        for (ct, cl) in [(dt, 0.0), (-dt, 0.0), (0.0, dls), (0.0, -dls)] {
            let nt = (t0 + ct).clamp(t_min, t_max);
            let nl = (ls + cl).clamp(ls_lo, ls_hi);
            if let Some((s2, _, _)) = eval(nt, nl) {
                if s2 < sse {
                    sse = s2;
                    t0 = nt;
                    ls = nl;
                    improved = true;
                }
            }
        }
        if !improved {
            dt *= 0.5;
            dls *= 0.5;
        }
    }

    let (sse, lower, upper) = eval(t0, ls).expect("accepted points are evaluable");
    Ok(SCurveFit {
        lower,
        upper,
        t0,
        s: ls.exp(),
        rmse: (sse / n).sqrt(),
        r2: if problem.sst > 0.0 {
            1.0 - sse / problem.sst
        } else {
            0.0
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncBand {
    pub start: f64,
    pub end: f64,
    pub members: Vec<String>,
}

impl SyncBand {
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// Largest subset of events whose spread is within `tolerance`, accepted
/// when it holds at least two thirds of all events (rounded up). Ties go to
/// the narrowest band, then the earliest.
pub fn synchronize(events: &BTreeMap<String, f64>, tolerance: f64) -> Option<SyncBand> {
    if events.len() < 2 {
        return None;
    }
    let mut sorted: Vec<(&String, f64)> = events.iter().map(|(k, &v)| (k, v)).collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let needed = (2 * sorted.len()).div_ceil(3);

    let mut best: Option<(usize, usize)> = None; // inclusive index range
    let mut j = 0;
    for i in 0..sorted.len() {
        j = j.max(i);
        while j + 1 < sorted.len() && sorted[j + 1].1 - sorted[i].1 <= tolerance {
            j += 1;
        }
        let better = match best {
            None => true,
            Some((bi, bj)) => {
                let (count, bcount) = (j - i, bj - bi);
                let (width, bwidth) = (sorted[j].1 - sorted[i].1, sorted[bj].1 - sorted[bi].1);
                count > bcount || (count == bcount && width < bwidth)
            }
        };
        if better {
            best = Some((i, j));
        }
    }
    let (i, j) = best?;
    if j - i + 1 < needed {
        return None;
    }
    let mut members: Vec<String> = sorted[i..=j].iter().map(|(k, _)| (*k).clone()).collect();
    members.sort();
    Some(SyncBand {
        start: sorted[i].1,
        end: sorted[j].1,
        members,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeLabel {
    Before,
    During,
    After,
    NoTransition,
}

/// An interval of checkpoints with explicit endpoint closure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeInterval {
    pub label: RegimeLabel,
    pub start: f64,
    pub end: f64,
    pub start_closed: bool,
    pub end_closed: bool,
    pub empty: bool,
}

impl RegimeInterval {
    pub fn contains(&self, t: f64) -> bool {
        let lo = if self.start_closed {
            t >= self.start
        } else {
            t > self.start
        };
        let hi = if self.end_closed {
            t <= self.end
        } else {
            t < self.end
        };
        !self.empty && lo && hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regimes {
    pub intervals: Vec<RegimeInterval>,
    /// True when the band swallows the start or end of the run.
    pub degenerate: bool,
}

/// `Before = [first, start)`, `During = [start, end]`, `After = (end, last]`.
pub fn label_regimes(band: Option<&SyncBand>, first: u64, last: u64) -> Regimes {
    let (first, last) = (first as f64, last as f64);
    let Some(band) = band else {
        return Regimes {
            intervals: vec![RegimeInterval {
                label: RegimeLabel::NoTransition,
                start: first,
                end: last,
                start_closed: true,
                end_closed: true,
                empty: false,
            }],
            degenerate: false,
        };
    };
    let before_empty = band.start <= first;
    let after_empty = band.end >= last;
    Regimes {
        intervals: vec![
            RegimeInterval {
                label: RegimeLabel::Before,
                start: first,
                end: band.start.max(first),
                start_closed: true,
                end_closed: false,
                empty: before_empty,
            },
            RegimeInterval {
                label: RegimeLabel::During,
                start: band.start,
                end: band.end,
                start_closed: true,
                end_closed: true,
                empty: false,
            },
            RegimeInterval {
                label: RegimeLabel::After,
                start: band.end.min(last),
                end: last,
                start_closed: false,
                end_closed: true,
                empty: after_empty,
            },
        ],
        degenerate: before_empty || after_empty,
    }
}

/// How a metric's event is located.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventRule {
    Peak,
    Reversal { target: f64 },
    Inflection,
}

/// Rules given in a config replace the default map as a whole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub half_width: usize,
    pub tolerance: f64,
    /// Inflection events need at least this much variance explained.
    pub min_r2: f64,
    pub rules: BTreeMap<String, EventRule>,
}

pub const DEFAULT_HALF_WIDTH: usize = 2;
pub const DEFAULT_TOLERANCE: f64 = 30.0;
pub const DEFAULT_MIN_R2: f64 = 0.5;
pub const SCURVE_METRIC: &str = "mean_len";
pub const MIN_DETECT_CHECKPOINTS: usize = 8;

impl Default for DetectorConfig {
    fn default() -> Self {
        let rules = [
            ("D_correct", EventRule::Reversal { target: 1.0 }),
            ("D_incorrect", EventRule::Inflection),
            ("KL_correct", EventRule::Peak),
            ("KL_incorrect", EventRule::Inflection),
            ("V_uniq_incorrect", EventRule::Peak),
            ("V_uniq_correct", EventRule::Inflection),
            (SCURVE_METRIC, EventRule::Inflection),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            half_width: DEFAULT_HALF_WIDTH,
            tolerance: DEFAULT_TOLERANCE,
            min_r2: DEFAULT_MIN_R2,
            rules,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvent {
    pub checkpoint: f64,
    pub rule: EventRule,
    /// Only interior events take part in synchronization.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub per_metric_events: BTreeMap<String, DetectedEvent>,
    pub sync_band: Option<SyncBand>,
    pub regimes: Regimes,
    pub scurve: Option<SCurveFit>,
    /// Metrics that produced no event, with the reason.
    pub skipped: BTreeMap<String, String>,
}

impl TransitionReport {
    pub fn has_transition(&self) -> bool {
        self.sync_band.is_some()
    }
}

fn locate(
    series: &MetricSeries,
    rule: EventRule,
    cfg: &DetectorConfig,
) -> Result<Option<DetectedEvent>> {
    Ok(match rule {
        EventRule::Peak => {
            let p = detect_peak(series, cfg.half_width)?;
            Some(DetectedEvent {
                checkpoint: p.checkpoint as f64,
                rule,
                interior: p.interior,
            })
        }
        EventRule::Reversal { target } => {
            detect_reversal(series, target, cfg.half_width)?.map(|p| DetectedEvent {
                checkpoint: p.checkpoint as f64,
                rule,
                interior: true,
            })
        }
        EventRule::Inflection => {
            let fit = fit_scurve(series)?;
            let d: Vec<_> = series.defined().collect();
            let (t_min, t_max) = (d[0].0 as f64, d[d.len() - 1].0 as f64);
            let interior = fit.r2 >= cfg.min_r2 && fit.t0 > t_min && fit.t0 < t_max;
            Some(DetectedEvent {
                checkpoint: fit.t0,
                rule,
                interior,
            })
        }
    })
}

/// Runs every configured rule over the matching series and assembles the
/// report. Series without a rule are ignored.
pub fn detect_transition(
    series: &[MetricSeries],
    cfg: &DetectorConfig,
) -> Result<TransitionReport> {
    let mut checkpoints: Vec<u64> = series
        .iter()
        .flat_map(|s| s.points().iter().map(|p| p.checkpoint))
        .collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.len() < MIN_DETECT_CHECKPOINTS {
        return Err(Error::TooFewPoints {
            name: "run".into(),
            needed: MIN_DETECT_CHECKPOINTS,
            got: checkpoints.len(),
        });
    }

    let mut per_metric_events = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    let mut scurve = None;
    for s in series {
        let Some(&rule) = cfg.rules.get(&s.name) else {
            continue;
        };
        if s.name == SCURVE_METRIC {
            scurve = fit_scurve(s).ok();
        }
        match locate(s, rule, cfg) {
            Ok(Some(ev)) => {
                per_metric_events.insert(s.name.clone(), ev);
            }
            Ok(None) => {
                skipped.insert(s.name.clone(), "no reversal found".to_string());
            }
            Err(e) => {
                skipped.insert(s.name.clone(), e.to_string());
            }
        }
    }

    let eligible: BTreeMap<String, f64> = per_metric_events
        .iter()
        .filter(|(_, e)| e.interior)
        .map(|(k, e)| (k.clone(), e.checkpoint))
        .collect();
    let sync_band = synchronize(&eligible, cfg.tolerance);
    let regimes = label_regimes(
        sync_band.as_ref(),
        checkpoints[0],
        checkpoints[checkpoints.len() - 1],
    );
    Ok(TransitionReport {
        per_metric_events,
        sync_band,
        regimes,
        scurve,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn series(values: &[f64]) -> MetricSeries {
        let pairs: Vec<(u64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u64, v))
            .collect();
        MetricSeries::from_pairs("m", &pairs).unwrap()
    }

    fn logistic_series(
        l0: f64,
        l1: f64,
        t0: f64,
        s: f64,
        checkpoints: impl Iterator<Item = u64>,
    ) -> MetricSeries {
        let pairs: Vec<(u64, f64)> = checkpoints
            .map(|c| (c, l0 + (l1 - l0) * logistic(s * (c as f64 - t0))))
            .collect();
        MetricSeries::from_pairs("mean_len", &pairs).unwrap()
    }

    #[test]
    fn rejects_unordered_checkpoints() {
        assert!(MetricSeries::from_pairs("x", &[(1, 0.0), (1, 1.0)]).is_err());
        assert!(MetricSeries::from_pairs("x", &[(2, 0.0), (1, 1.0)]).is_err());
    }

    #[test]
    fn smoothing_by_hand() {
        let s = smooth(&series(&[1.0, 1.0, 10.0, 1.0, 1.0]), 1);
        assert_eq!(
            s.values(),
            [Some(1.0), Some(4.0), Some(4.0), Some(4.0), Some(1.0)]
        );
        let raw = series(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        assert_eq!(smooth(&raw, 0), raw);
    }

    #[test]
    fn smoothing_skips_undefined() {
        let s = MetricSeries::new(
            "m",
            None,
            [Some(2.0), None, Some(4.0)]
                .iter()
                .enumerate()
                .map(|(i, &value)| SeriesPoint {
                    checkpoint: i as u64,
                    value,
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(smooth(&s, 1).values(), [Some(2.0), None, Some(4.0)]);
    }

    #[test]
    fn peak_by_hand() {
        let s = MetricSeries::from_pairs(
            "v",
            &[(0, 1.0), (100, 2.0), (250, 9.0), (400, 3.0), (600, 2.0)],
        )
        .unwrap();
        for hw in [0, 1] {
            let p = detect_peak(&s, hw).unwrap();
            assert_eq!(p.checkpoint, 250);
            assert!(p.interior);
        }
    }

    #[test]
    fn monotone_peak_is_flagged() {
        let p = detect_peak(&series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), 0).unwrap();
        assert_eq!(p.checkpoint, 5);
        assert!(!p.interior);
        let p = detect_peak(&series(&[2.0; 6]), 0).unwrap();
        assert_eq!(p.checkpoint, 0);
        assert!(!p.interior);
    }

    #[test]
    fn peak_needs_five_points() {
        assert!(matches!(
            detect_peak(&series(&[1.0, 2.0, 1.0, 0.0]), 0),
            Err(Error::TooFewPoints {
                needed: 5,
                got: 4,
                ..
            })
        ));
    }

    #[test]
    fn reversal_toward_one() {
        // sub-Poisson, brief return to 1, deeper sub-Poisson
        let d = [0.8, 0.78, 0.82, 0.8, 0.9, 1.0, 0.9, 0.6, 0.4, 0.3, 0.3];
        let r = detect_reversal(&series(&d), 1.0, 0).unwrap().unwrap();
        assert_eq!(r.checkpoint, 5);
        assert!(detect_reversal(&series(&[0.5; 8]), 1.0, 0)
            .unwrap()
            .is_none());
        let monotone = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5];
        assert!(detect_reversal(&series(&monotone), 1.0, 0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn scurve_recovers_exact_logistic() {
        let s = logistic_series(1.5, 2.5, 240.0, 0.1, (0..=600).step_by(10));
        let fit = fit_scurve(&s).unwrap();
        assert!((235.0..=245.0).contains(&fit.t0), "{fit:?}");
        assert!((fit.t0 - 240.0).abs() < 10.0);
        assert!((fit.lower - 1.5).abs() < 0.015);
        assert!((fit.upper - 2.5).abs() < 0.025);
        assert!(fit.rmse < 1e-6);
        assert!(fit.s > 0.0);
    }

    #[test]
    fn scurve_on_step_is_within_one_spacing() {
        let pairs: Vec<(u64, f64)> = (0..100)
            .map(|c| (c, if c < 37 { 1.0 } else { 3.0 }))
            .collect();
        let fit = fit_scurve(&MetricSeries::from_pairs("m", &pairs).unwrap()).unwrap();
        assert!((36.0..=37.0).contains(&fit.t0), "{fit:?}");
    }

    #[test]
    fn scurve_falling() {
        let s = logistic_series(3.0, 0.5, 70.0, 0.2, 0..150);
        let fit = fit_scurve(&s).unwrap();
        assert!((fit.t0 - 70.0).abs() < 0.5);
        assert!(fit.upper < fit.lower);
    }

    #[test]
    fn scurve_rejects_constant_and_short() {
        assert!(matches!(
            fit_scurve(&series(&[2.0; 12])),
            Err(Error::NoTransition(_))
        ));
        assert!(matches!(
            fit_scurve(&series(&[1.0, 2.0, 3.0])),
            Err(Error::TooFewPoints { needed: 8, .. })
        ));
    }

    #[test]
    fn synchronize_by_hand() {
        let ev: BTreeMap<String, f64> = [("a", 240.0), ("b", 245.0), ("c", 250.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let band = synchronize(&ev, 20.0).unwrap();
        assert_eq!((band.start, band.end), (240.0, 250.0));
        assert_eq!(band.members, ["a", "b", "c"]);

        let ev: BTreeMap<String, f64> = [("a", 100.0), ("b", 400.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert!(synchronize(&ev, 20.0).is_none());
        assert!(synchronize(&BTreeMap::new(), 20.0).is_none());
    }

    #[test]
    fn synchronize_majority_and_narrowest() {
        let ev: BTreeMap<String, f64> = [
            ("a", 10.0),
            ("b", 100.0),
            ("c", 110.0),
            ("d", 112.0),
            ("e", 300.0),
            ("f", 305.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        // three of six clustered is short of the ceil(2/3 * 6) = 4 majority
        assert!(synchronize(&ev, 20.0).is_none());
        let band = synchronize(&ev, 210.0).unwrap();
        assert_eq!(band.members.len(), 5);
        assert_eq!((band.start, band.end), (100.0, 305.0));
    }

    #[test]
    fn regimes_from_band() {
        let band = SyncBand {
            start: 230.0,
            end: 250.0,
            members: vec![],
        };
        let r = label_regimes(Some(&band), 0, 600);
        let labels: Vec<_> = r.intervals.iter().map(|i| i.label).collect();
        assert_eq!(
            labels,
            [RegimeLabel::Before, RegimeLabel::During, RegimeLabel::After]
        );
        assert!(!r.degenerate);
        assert!(r.intervals[0].contains(0.0) && !r.intervals[0].contains(230.0));
        assert!(r.intervals[1].contains(230.0) && r.intervals[1].contains(250.0));
        assert!(!r.intervals[2].contains(250.0) && r.intervals[2].contains(600.0));
        for t in 0..=600 {
            let hits = r.intervals.iter().filter(|i| i.contains(t as f64)).count();
            assert_eq!(hits, 1, "t={t}");
        }

        let whole = SyncBand {
            start: 0.0,
            end: 600.0,
            members: vec![],
        };
        let r = label_regimes(Some(&whole), 0, 600);
        assert!(r.degenerate);
        assert!(r.intervals[0].empty && r.intervals[2].empty);

        let r = label_regimes(None, 0, 600);
        assert_eq!(r.intervals.len(), 1);
        assert_eq!(r.intervals[0].label, RegimeLabel::NoTransition);
        assert_eq!((r.intervals[0].start, r.intervals[0].end), (0.0, 600.0));
    }

    #[test]
    fn constant_metrics_give_no_transition() {
        let cfg = DetectorConfig::default();
        let series: Vec<_> = cfg
            .rules
            .keys()
            .map(|k| {
                let pairs: Vec<(u64, f64)> = (0..20).map(|c| (c, 0.7)).collect();
                let mut s = MetricSeries::from_pairs(k.clone(), &pairs).unwrap();
                s.name = k.clone();
                s
            })
            .collect();
        let report = detect_transition(&series, &cfg).unwrap();
        assert!(report.sync_band.is_none(), "{report:#?}");
        assert_eq!(report.regimes.intervals[0].label, RegimeLabel::NoTransition);
        assert!(report.scurve.is_none());
    }

    #[test]
    fn too_few_checkpoints() {
        let s = MetricSeries::from_pairs("mean_len", &[(0, 1.0), (1, 2.0)]).unwrap();
        assert!(detect_transition(&[s], &DetectorConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn affine_rescaling_preserves_locations(a in 0.1f64..20.0, b in -5.0f64..5.0, t0 in 20.0f64..80.0, s in 0.05f64..1.0) {
            let base = logistic_series(1.0, 2.0, t0, s, 0..100);
            let pairs: Vec<(u64, f64)> = base.defined().map(|(c, v)| (c, a * v + b)).collect();
            let scaled = MetricSeries::from_pairs("mean_len", &pairs).unwrap();
            let f1 = fit_scurve(&base).unwrap();
            let f2 = fit_scurve(&scaled).unwrap();
            prop_assert!((f1.t0 - f2.t0).abs() < 1e-3, "{} vs {}", f1.t0, f2.t0);

            let bump: Vec<(u64, f64)> = (0..60u64).map(|c| (c, (-(c as f64 - t0 / 2.0).powi(2) / 30.0).exp())).collect();
            let bump_scaled: Vec<(u64, f64)> = bump.iter().map(|&(c, v)| (c, a * v + b)).collect();
            let p1 = detect_peak(&MetricSeries::from_pairs("v", &bump).unwrap(), 2).unwrap();
            let p2 = detect_peak(&MetricSeries::from_pairs("v", &bump_scaled).unwrap(), 2).unwrap();
            prop_assert_eq!(p1.checkpoint, p2.checkpoint);
        }

        #[test]
        fn band_contains_members(vals in proptest::collection::vec(0.0f64..600.0, 2..9), tol in 1.0f64..100.0) {
            let ev: BTreeMap<String, f64> = vals.iter().enumerate().map(|(i, &v)| (format!("m{i}"), v)).collect();
            if let Some(band) = synchronize(&ev, tol) {
                prop_assert!(band.width() <= tol);
                prop_assert!(band.members.len() >= (2 * ev.len()).div_ceil(3));
                for m in &band.members {
                    prop_assert!(band.contains(ev[m]));
                }
            }
        }

        #[test]
        fn noiseless_logistic_within_one_spacing(t0 in 10.0f64..190.0, s in 0.05f64..2.0, step in 1u64..5) {
            let fit = fit_scurve(&logistic_series(1.5, 2.5, t0, s, (0..=200).step_by(step as usize))).unwrap();
            prop_assert!((fit.t0 - t0).abs() <= step as f64, "{} vs {}", fit.t0, t0);
        }
    }
}
