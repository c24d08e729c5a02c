//! Minimal SVG emitters: line plots with error bands, count histograms with
//! Poisson baseline dots, and horizontal bar charts. Output depends only on
//! the inputs, so reruns produce identical files.
//!
//! Data-carrying elements have a `class` and `data-*` attributes with the
//! plotted values, which keeps the files checkable without rendering them.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

pub const CORRECT_COLOR: &str = "#2b6cb0";
pub const INCORRECT_COLOR: &str = "#c53030";
const BAND_COLOR: &str = "#f6e05e";
const MEAN_COLOR: &str = "#1a202c";

fn px(v: f64) -> String {
    format!("{v:.2}")
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Round tick positions covering `[lo, hi]`, about `target` of them.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').to_string()
    }
}

/// Maps data coordinates into a plotting rectangle.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), left: f64, right: f64) -> Self {
        Self {
            x: widen(x),
            y: widen(y),
            left,
            right,
            top: MARGIN_TOP,
            bottom: HEIGHT - MARGIN_BOTTOM,
        }
    }

    fn sx(&self, v: f64) -> f64 {
        self.left + (v - self.x.0) / (self.x.1 - self.x.0) * (self.right - self.left)
    }

    fn sy(&self, v: f64) -> f64 {
        self.bottom - (v - self.y.0) / (self.y.1 - self.y.0) * (self.bottom - self.top)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str, x_ticks: &[f64]) {
        let _ = write!(
            out,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#4a5568"/>"##,
            px(self.left),
            px(self.top),
            px(self.right - self.left),
            px(self.bottom - self.top)
        );
        out.push('\n');
        for &t in x_ticks {
            let x = self.sx(t);
            let _ = writeln!(
                out,
                r##"<line x1="{x}" y1="{b}" x2="{x}" y2="{b5}" stroke="#4a5568"/><text x="{x}" y="{bt}" text-anchor="middle" font-size="11">{l}</text>"##,
                x = px(x),
                b = px(self.bottom),
                b5 = px(self.bottom + 5.0),
                bt = px(self.bottom + 18.0),
                l = tick_label(t)
            );
        }
        for t in nice_ticks(self.y.0, self.y.1, 5) {
            let y = self.sy(t);
            let _ = writeln!(
                out,
                r##"<line x1="{l5}" y1="{y}" x2="{l}" y2="{y}" stroke="#4a5568"/><text x="{lt}" y="{yt}" text-anchor="end" font-size="11">{lab}</text>"##,
                l5 = px(self.left - 5.0),
                l = px(self.left),
                y = px(y),
                lt = px(self.left - 8.0),
                yt = px(y + 4.0),
                lab = tick_label(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            px((self.left + self.right) / 2.0),
            px(HEIGHT - 12.0),
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="12" transform="rotate(-90 {x} {y})">{}</text>"#,
            escape(y_label),
            x = px(self.left - 50.0),
            y = px((self.top + self.bottom) / 2.0),
        );
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        px(WIDTH / 2.0),
        escape(title)
    );
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinePoint {
    pub x: f64,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

/// Optional decorations of a line plot.
#[derive(Default)]
pub struct LineExtras<'a> {
    /// Shaded checkpoint interval.
    pub band: Option<(f64, f64)>,
    /// Dashed horizontal reference line.
    pub reference: Option<f64>,
    /// Dashed fitted curve.
    pub fit: Option<&'a dyn Fn(f64) -> f64>,
}

/// Mean line with a ±1 sd envelope. Undefined means break the line.
pub fn line_plot(title: &str, y_label: &str, points: &[LinePoint], extras: &LineExtras) -> String {
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let x_range = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let mut ys: Vec<f64> = Vec::new();
    for p in points {
        if let Some(m) = p.mean {
            let s = p.sd.unwrap_or(0.0);
            ys.extend([m - s, m + s]);
        }
    }
    ys.extend(extras.reference);
    let (mut lo, mut hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = (hi - lo) * 0.05;
    let x_range = if x_range.0.is_finite() {
        x_range
    } else {
        (0.0, 1.0)
    };
    let frame = Frame::new(
        x_range,
        (lo - pad, hi + pad),
        MARGIN_LEFT,
        WIDTH - MARGIN_RIGHT,
    );

    let mut out = String::new();
    header(&mut out, title);
    if let Some((a, b)) = extras.band {
        let (xa, xb) = (frame.sx(a.max(frame.x.0)), frame.sx(b.min(frame.x.1)));
        let _ = writeln!(
            out,
            r#"<rect class="sync-band" data-start="{a}" data-end="{b}" x="{}" y="{}" width="{}" height="{}" fill="{BAND_COLOR}" fill-opacity="0.35"/>"#,
            px(xa),
            px(frame.top),
            px((xb - xa).max(1.0)),
            px(frame.bottom - frame.top)
        );
    }
    frame.axes(
        &mut out,
        "checkpoint",
        y_label,
        &nice_ticks(frame.x.0, frame.x.1, 8),
    );
    if let Some(r) = extras.reference {
        let _ = writeln!(
            out,
            r##"<line class="reference" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#718096" stroke-dasharray="4 4"/>"##,
            px(frame.left),
            px(frame.right),
            y = px(frame.sy(r))
        );
    }

    // Contiguous runs of defined points.
    let mut runs: Vec<Vec<LinePoint>> = vec![Vec::new()];
    for p in points {
        if p.mean.is_some() {
            runs.last_mut().expect("non-empty").push(*p);
        } else if !runs.last().expect("non-empty").is_empty() {
            runs.push(Vec::new());
        }
    }
    for run in runs.iter().filter(|r| !r.is_empty()) {
        if run.iter().any(|p| p.sd.is_some()) {
            let upper = run
                .iter()
                .map(|p| (p.x, p.mean.unwrap_or(0.0) + p.sd.unwrap_or(0.0)));
            let lower = run
                .iter()
                .rev()
                .map(|p| (p.x, p.mean.unwrap_or(0.0) - p.sd.unwrap_or(0.0)));
            let pts: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{},{}", px(frame.sx(x)), px(frame.sy(y))))
                .collect();
            let _ = writeln!(
                out,
                r#"<polygon class="sd-band" points="{}" fill="{CORRECT_COLOR}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = run
            .iter()
            .map(|p| {
                format!(
                    "{},{}",
                    px(frame.sx(p.x)),
                    px(frame.sy(p.mean.unwrap_or(0.0)))
                )
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{MEAN_COLOR}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }
    if let Some(f) = extras.fit {
        let n = 200;
        let pts: Vec<String> = (0..=n)
            .map(|i| {
                let x = frame.x.0 + (frame.x.1 - frame.x.0) * i as f64 / n as f64;
                let y = f(x).clamp(frame.y.0, frame.y.1);
                format!("{},{}", px(frame.sx(x)), px(frame.sy(y)))
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="fit" points="{}" fill="none" stroke="{INCORRECT_COLOR}" stroke-width="1.2" stroke-dasharray="6 3"/>"#,
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One class of a side-by-side count histogram.
pub struct HistPanel<'a> {
    pub label: &'a str,
    pub color: &'a str,
    /// `pmf[n]` for `n = 0..=W`.
    pub pmf: &'a [f64],
    /// Fitted Poisson pmf on the same support.
    pub poisson: &'a [f64],
    pub lambda: f64,
    pub n_windows: usize,
}

/// Empirical count distribution bars with Poisson baseline dots. Bars are
/// drawn where the empirical mass is positive; dots cover the visible
/// support.
pub fn histogram(title: &str, panels: &[HistPanel]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let k = panels.len().max(1) as f64;
    let slot = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / k;
    for (i, p) in panels.iter().enumerate() {
        let last_bar = p.pmf.iter().rposition(|&v| v > 0.0).unwrap_or(0);
        let last_dot = p.poisson.iter().rposition(|&v| v >= 1e-3).unwrap_or(0);
        let n_max = (last_bar.max(last_dot) + 1)
            .min(p.pmf.len().saturating_sub(1))
            .max(1);
        let y_max = p.pmf[..=n_max]
            .iter()
            .chain(&p.poisson[..=n_max.min(p.poisson.len().saturating_sub(1))])
            .fold(0.0f64, |a, &b| a.max(b))
            .max(1e-9)
            * 1.1;
        let left = MARGIN_LEFT + i as f64 * slot;
        let right = left + slot - 30.0;
        let mut frame = Frame::new((-0.5, n_max as f64 + 0.5), (0.0, y_max), left, right);
        // Room for the panel label under the title.
        frame.top += 16.0;
        let step = (n_max / 10).max(1);
        let ticks: Vec<f64> = (0..=n_max).step_by(step).map(|n| n as f64).collect();
        frame.axes(
            &mut out,
            "count per window",
            if i == 0 { "fraction of windows" } else { "" },
            &ticks,
        );
        let _ = writeln!(
            out,
            r#"<text class="panel-label" x="{}" y="{}" text-anchor="middle" font-size="12">{} (λ̂ = {:.3}, {} windows)</text>"#,
            px((left + right) / 2.0),
            px(frame.top - 4.0),
            escape(p.label),
            p.lambda,
            p.n_windows
        );
        let bar_w = (frame.sx(1.0) - frame.sx(0.0)) * 0.8;
        for (n, &v) in p.pmf.iter().enumerate().take(n_max + 1) {
            if v <= 0.0 {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<rect class="bar" data-n="{n}" data-p="{v:.6}" x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="0.7"/>"#,
                px(frame.sx(n as f64) - bar_w / 2.0),
                px(frame.sy(v)),
                px(bar_w),
                px(frame.bottom - frame.sy(v)),
                p.color
            );
        }
        for (n, &v) in p.poisson.iter().enumerate().take(n_max + 1) {
            let _ = writeln!(
                out,
                r#"<circle class="poisson" data-n="{n}" data-p="{v:.6}" cx="{}" cy="{}" r="3.5" fill="{MEAN_COLOR}"/>"#,
                px(frame.sx(n as f64)),
                px(frame.sy(v))
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub struct Bar<'a> {
    pub label: &'a str,
    pub value: f64,
    pub correct: bool,
}

/// Horizontal bars, top to bottom in the given order, colored by class.
pub fn bar_chart(title: &str, x_label: &str, bars: &[Bar]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let max = bars.iter().map(|b| b.value).fold(0.0f64, f64::max).max(1.0);
    let left = 130.0;
    let frame = Frame::new((0.0, max * 1.05), (0.0, 1.0), left, WIDTH - MARGIN_RIGHT);
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#4a5568"/>"##,
        px(frame.left),
        px(frame.top),
        px(frame.right - frame.left),
        px(frame.bottom - frame.top)
    );
    for t in nice_ticks(0.0, max * 1.05, 6) {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
            px(frame.sx(t)),
            px(frame.bottom + 16.0),
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        px((frame.left + frame.right) / 2.0),
        px(HEIGHT - 14.0),
        escape(x_label)
    );
    let slot = (frame.bottom - frame.top) / bars.len().max(1) as f64;
    for (i, b) in bars.iter().enumerate() {
        let y = frame.top + i as f64 * slot;
        let color = if b.correct {
            CORRECT_COLOR
        } else {
            INCORRECT_COLOR
        };
        let class = if b.correct { "correct" } else { "incorrect" };
        let _ = writeln!(
            out,
            r#"<rect class="bar {class}" data-word="{w}" data-count="{v}" x="{}" y="{}" width="{}" height="{}" fill="{color}"/><text x="{}" y="{}" text-anchor="end" font-size="11">{w}</text>"#,
            px(frame.left),
            px(y + slot * 0.1),
            px(frame.sx(b.value) - frame.left),
            px(slot * 0.8),
            px(frame.left - 6.0),
            px(y + slot * 0.5 + 4.0),
            w = escape(b.label),
            v = b.value,
        );
    }
    for (j, (label, color)) in [("correct", CORRECT_COLOR), ("incorrect", INCORRECT_COLOR)]
        .iter()
        .enumerate()
    {
        // Legend sits in the title row, right-aligned, clear of the bars.
        let x = WIDTH - 170.0 + j as f64 * 80.0;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="14" width="12" height="12" fill="{color}"/><text x="{}" y="24" font-size="11">{label}</text>"#,
            px(x),
            px(x + 16.0),
        );
    }
    out.push_str("</svg>\n");
    out
}
