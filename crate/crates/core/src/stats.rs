//! Windowed class counts and the two Poisson-centered probes: the index of
//! dispersion and the KL divergence from a fitted Poisson.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::segmenter::{Label, LabeledWordStream};

pub const DEFAULT_WINDOW: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub window_size: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW,
        }
    }
}

impl StatsConfig {
    pub fn new(window_size: usize) -> Result<Self> {
        if window_size == 0 {
            return Err(Error::ZeroWindow);
        }
        Ok(Self { window_size })
    }
}

/// Empirical distribution of per-window counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountHistogram {
    pub window_size: usize,
    pub counts_per_window: Vec<u32>,
    /// `pmf[n]` is the fraction of windows with count `n`, for `n` in `0..=W`.
    pub pmf: Vec<f64>,
    pub lambda_hat: f64,
    pub n_windows: usize,
}

impl CountHistogram {
    /// Builds a histogram from raw per-window counts, each of which must be
    /// at most `window_size`.
    pub fn from_counts(counts: Vec<u32>, window_size: usize) -> Result<Self> {
        if window_size == 0 {
            return Err(Error::ZeroWindow);
        }
        let n_windows = counts.len();
        let mut pmf = vec![0.0; window_size + 1];
        let mut total = 0u64;
        for &c in &counts {
            let slot = pmf.get_mut(c as usize).ok_or_else(|| {
                Error::InvalidSpec(format!("count {c} exceeds window size {window_size}"))
            })?;
            *slot += 1.0;
            total += u64::from(c);
        }
        let lambda_hat = if n_windows > 0 {
            let n = n_windows as f64;
            pmf.iter_mut().for_each(|p| *p /= n);
            total as f64 / n
        } else {
            0.0
        };
        Ok(Self {
            window_size,
            counts_per_window: counts,
            pmf,
            lambda_hat,
            n_windows,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.n_windows == 0
    }
}

/// Mean, unbiased variance and the index of dispersion `D = var / mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    pub mean: f64,
    /// `None` with fewer than two windows.
    pub variance: Option<f64>,
    /// `None` when the mean is zero or there are fewer than two windows.
    pub fano: Option<f64>,
}

impl DispersionResult {
    pub fn regime(&self) -> Option<Regime> {
        self.fano.map(Regime::classify)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    SubPoisson,
    Poisson,
    SuperPoisson,
}

impl Regime {
    /// Band of `|D - 1|` treated as Poissonian.
    pub const POISSON_BAND: f64 = 0.1;

    pub fn classify(d: f64) -> Self {
        if d < 1.0 - Self::POISSON_BAND {
            Regime::SubPoisson
        } else if d > 1.0 + Self::POISSON_BAND {
            Regime::SuperPoisson
        } else {
            Regime::Poisson
        }
    }
}

/// Counts words of `class` in consecutive, non-overlapping blocks of
/// `cfg.window_size` words. A trailing partial block is dropped.
pub fn window_counts(stream: &LabeledWordStream, class: Label, cfg: StatsConfig) -> CountHistogram {
    let w = cfg.window_size.max(1);
    let counts = stream
        .words()
        .chunks_exact(w)
        .map(|block| block.iter().filter(|x| x.label == class).count() as u32)
        .collect();
    CountHistogram::from_counts(counts, w).expect("block counts never exceed the window size")
}

pub fn dispersion(hist: &CountHistogram) -> DispersionResult {
    dispersion_of(&hist.counts_per_window)
}

pub(crate) fn dispersion_of(counts: &[u32]) -> DispersionResult {
    let n = counts.len();
    if n == 0 {
        return DispersionResult {
            mean: 0.0,
            variance: None,
            fano: None,
        };
    }
    let mean = counts.iter().map(|&c| f64::from(c)).sum::<f64>() / n as f64;
    if n < 2 {
        return DispersionResult {
            mean,
            variance: None,
            fano: None,
        };
    }
    let ss: f64 = counts
        .iter()
        .map(|&c| {
            let d = f64::from(c) - mean;
            d * d
        })
        .sum();
    let variance = ss / (n - 1) as f64;
    let fano = (mean > 0.0).then(|| variance / mean);
    DispersionResult {
        mean,
        variance: Some(variance),
        fano,
    }
}

/// Natural log of the Poisson pmf, evaluated through the log-gamma function.
pub fn poisson_ln_pmf(n: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let k = f64::from(n);
    k * lambda.ln() - lambda - ln_gamma(k + 1.0)
}

pub fn poisson_pmf(n: u32, lambda: f64) -> f64 {
    poisson_ln_pmf(n, lambda).exp()
}

/// `KL(p̂ || Pois(λ̂))` in nats, summed over the empirical support.
pub fn kl_to_poisson(hist: &CountHistogram) -> Result<f64> {
    if hist.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    if hist.lambda_hat == 0.0 {
        // all windows are zero: a degenerate but exact fit
        return Ok(0.0);
    }
    let kl: f64 = hist
        .pmf
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(n, &p)| p * (p.ln() - poisson_ln_pmf(n as u32, hist.lambda_hat)))
        .sum();
    Ok(kl.max(0.0))
}

/// Empirical bars and the fitted Poisson baseline over the support `0..=W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSeries {
    pub support: Vec<u32>,
    pub empirical: Vec<f64>,
    pub poisson: Vec<f64>,
    pub lambda_hat: f64,
}

impl BaselineSeries {
    pub fn max_abs_gap(&self) -> f64 {
        self.empirical
            .iter()
            .zip(&self.poisson)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn histogram_with_baseline(hist: &CountHistogram) -> Result<BaselineSeries> {
    if hist.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    let support: Vec<u32> = (0..=hist.window_size as u32).collect();
    let poisson = support
        .iter()
        .map(|&n| poisson_pmf(n, hist.lambda_hat))
        .collect();
    Ok(BaselineSeries {
        support,
        empirical: hist.pmf.clone(),
        poisson,
        lambda_hat: hist.lambda_hat,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::segmenter::{Label::*, StreamSource};

    fn stream(labels: &[Label]) -> LabeledWordStream {
        LabeledWordStream::from_labels(labels.iter().map(|&l| ("w", l)), StreamSource::default())
    }

    fn hist(counts: &[u32], w: usize) -> CountHistogram {
        CountHistogram::from_counts(counts.to_vec(), w).unwrap()
    }

    fn naive_pmf(n: u32, lambda: f64) -> f64 {
        let fact: f64 = (1..=n).map(f64::from).product();
        lambda.powi(n as i32) * (-lambda).exp() / fact
    }

    #[test]
    fn window_counts_per_class() {
        let s = stream(&[
            Correct, Incorrect, Correct, Correct, Correct, Incorrect, Incorrect, Incorrect,
            Incorrect,
        ]);
        let cfg = StatsConfig::new(3).unwrap();
        let c = window_counts(&s, Correct, cfg);
        assert_eq!(c.counts_per_window, [2, 2, 0]);
        assert!((c.lambda_hat - 4.0 / 3.0).abs() < 1e-15);
        let i = window_counts(&s, Incorrect, cfg);
        assert_eq!(i.counts_per_window, [1, 1, 3]);
        assert!((i.lambda_hat - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn partial_windows_are_dropped() {
        let s = stream(&[Correct; 7]);
        let h = window_counts(&s, Correct, StatsConfig::new(3).unwrap());
        assert_eq!(h.counts_per_window, [3, 3]);
        let short = window_counts(&s, Correct, StatsConfig::new(8).unwrap());
        assert!(short.is_empty());
        assert_eq!(short.lambda_hat, 0.0);
    }

    #[test]
    fn rejects_zero_window_and_overflowing_counts() {
        assert!(matches!(StatsConfig::new(0), Err(Error::ZeroWindow)));
        assert!(CountHistogram::from_counts(vec![4], 3).is_err());
    }

    #[test]
    fn dispersion_hand_cases() {
        let d = dispersion(&hist(&[5, 5, 5, 5], 21));
        assert_eq!(d.fano, Some(0.0));
        let d = dispersion(&hist(&[0, 2, 0, 2], 21));
        assert_eq!(d.mean, 1.0);
        assert!((d.variance.unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((d.fano.unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dispersion_undefined_cases() {
        assert_eq!(dispersion(&hist(&[0, 0, 0], 21)).fano, None);
        assert_eq!(dispersion(&hist(&[4], 21)).fano, None);
        assert_eq!(dispersion(&hist(&[], 21)).fano, None);
    }

    #[test]
    fn regime_bands() {
        assert_eq!(Regime::classify(0.3), Regime::SubPoisson);
        assert_eq!(Regime::classify(1.02), Regime::Poisson);
        assert_eq!(Regime::classify(2.0), Regime::SuperPoisson);
    }

    #[test]
    fn kl_single_bin_is_one_nat() {
        let h = hist(&[1; 50], 21);
        let kl = kl_to_poisson(&h).unwrap();
        assert!((kl - 1.0).abs() < 1e-12, "{kl}");
    }

    #[test]
    fn kl_all_zero_and_empty() {
        assert_eq!(kl_to_poisson(&hist(&[0, 0, 0], 21)).unwrap(), 0.0);
        assert!(matches!(
            kl_to_poisson(&hist(&[], 21)),
            Err(Error::EmptyHistogram)
        ));
        assert!(histogram_with_baseline(&hist(&[], 21)).is_err());
    }

    #[test]
    fn baseline_for_delta_at_one() {
        let b = histogram_with_baseline(&hist(&[1, 1, 1], 21)).unwrap();
        assert_eq!(b.support.len(), 22);
        assert_eq!(b.empirical[1], 1.0);
        let e = (-1.0f64).exp();
        assert!((b.poisson[0] - e).abs() < 1e-14);
        assert!((b.poisson[1] - e).abs() < 1e-14);
        assert!((b.poisson[2] - e / 2.0).abs() < 1e-14);
        assert!((b.poisson[0] - 0.3679).abs() < 1e-4);
        assert!((b.poisson[2] - 0.1839).abs() < 1e-4);
    }

    #[test]
    fn log_gamma_path_matches_factorials() {
        for n in 0..=20u32 {
            for lambda in [0.1, 0.5, 1.0, 2.5, 5.0, 8.0, 13.7, 21.0] {
                let a = poisson_pmf(n, lambda);
                let b = naive_pmf(n, lambda);
                assert!(((a - b) / b).abs() < 1e-10, "n={n} λ={lambda}: {a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn class_counts_sum_to_window(bits in proptest::collection::vec(any::<bool>(), 0..300), w in 1usize..30) {
            let labels: Vec<Label> = bits.iter().map(|&b| if b { Correct } else { Incorrect }).collect();
            let s = stream(&labels);
            let cfg = StatsConfig::new(w).unwrap();
            let c = window_counts(&s, Correct, cfg);
            let i = window_counts(&s, Incorrect, cfg);
            prop_assert_eq!(c.n_windows, labels.len() / w);
            for (a, b) in c.counts_per_window.iter().zip(&i.counts_per_window) {
                prop_assert_eq!((a + b) as usize, w);
            }
            if !c.is_empty() {
                prop_assert!((c.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn kl_nonnegative_and_dispersion_permutation_invariant(
            counts in proptest::collection::vec(0u32..=21, 1..60),
            rot in 0usize..60,
        ) {
            let h = hist(&counts, 21);
            prop_assert!(kl_to_poisson(&h).unwrap() >= 0.0);
            let mut rotated = counts.clone();
            let k = rot % counts.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let a = dispersion(&h);
            let b = dispersion(&hist(&rotated, 21));
            match (a.fano, b.fano) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0)),
                (x, y) => prop_assert_eq!(x, y),
            }
        }

        #[test]
        fn constant_counts_have_zero_dispersion(c in 1u32..=21, n in 2usize..40) {
            prop_assert_eq!(dispersion(&hist(&vec![c; n], 21)).fano, Some(0.0));
        }
    }
}
