//! Statistics checked against generators with known targets, and against
//! brute-force recomputation that shares no code with the library.

use lexphase_core::stats::{
    dispersion, histogram_with_baseline, kl_to_poisson, window_counts, CountHistogram, StatsConfig,
};
use lexphase_core::synth::{generate_labeled_stream, SyntheticKind, SyntheticSpec};
use lexphase_core::Label;

const W: usize = 21;

fn correct_counts(kind: SyntheticKind, windows: usize, seed: u64) -> CountHistogram {
    let stream = generate_labeled_stream(&SyntheticSpec::new(kind, windows, seed)).unwrap();
    window_counts(&stream, Label::Correct, StatsConfig::default())
}

/// Unbiased variance over mean, by two plain passes.
fn brute_fano(counts: &[u32]) -> f64 {
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let ss: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
    ss / (n - 1.0) / mean
}

/// KL from empirical frequencies to the fitted Poisson, with the pmf built
/// from an iterated product instead of log-gamma.
fn brute_kl(counts: &[u32]) -> f64 {
    let n = counts.len() as f64;
    let lambda = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let max = *counts.iter().max().unwrap() as usize;
    let mut pois = vec![(-lambda).exp()];
    for k in 1..=max {
        let prev = pois[k - 1];
        pois.push(prev * lambda / k as f64);
    }
    let mut freq = vec![0usize; max + 1];
    for &c in counts {
        freq[c as usize] += 1;
    }
    freq.iter()
        .enumerate()
        .filter(|(_, &f)| f > 0)
        .map(|(k, &f)| {
            let p = f as f64 / n;
            p * (p / pois[k]).ln()
        })
        .sum()
}

#[test]
fn poisson_stream_is_poissonian() {
    let h = correct_counts(SyntheticKind::PoissonStream { lambda: 5.0 }, 10_000, 11);
    let d = dispersion(&h).fano.unwrap();
    let kl = kl_to_poisson(&h).unwrap();
    assert!((0.95..=1.05).contains(&d), "D = {d}");
    assert!(kl < 0.01, "KL = {kl}");
    assert!((d - brute_fano(&h.counts_per_window)).abs() < 1e-12);
    assert!((kl - brute_kl(&h.counts_per_window)).abs() < 1e-10);
}

#[test]
fn bernoulli_labels_match_binomial_targets() {
    let h = correct_counts(SyntheticKind::BernoulliLabels { p: 0.3 }, 10_000, 5);
    assert_eq!(h.n_windows, 10_000);
    assert!(
        (6.0..=6.6).contains(&h.lambda_hat),
        "lambda = {}",
        h.lambda_hat
    );
    let d = dispersion(&h).fano.unwrap();
    assert!((0.65..=0.75).contains(&d), "D = {d}");
    assert!((d - brute_fano(&h.counts_per_window)).abs() < 1e-12);
}

#[test]
fn regular_stream_has_zero_dispersion() {
    for period in [1, 3, 7, 21] {
        let h = correct_counts(SyntheticKind::RegularStream { period }, 500, 0);
        assert!(h
            .counts_per_window
            .iter()
            .all(|&c| c as usize == W / period));
        assert_eq!(dispersion(&h).fano, Some(0.0), "period {period}");
    }
}

#[test]
fn bursty_stream_is_super_poisson() {
    let h = correct_counts(
        SyntheticKind::BurstyStream {
            burst_size: 6,
            gap: 14.0,
        },
        5_000,
        2,
    );
    assert!(dispersion(&h).fano.unwrap() > 1.5);
}

#[test]
fn poisson_dispersion_is_unbiased_across_datasets() {
    for lambda in [1.0, 3.0, 5.0, 8.0] {
        let ds: Vec<f64> = (0..50)
            .map(|seed| {
                let h = correct_counts(SyntheticKind::PoissonStream { lambda }, 2_000, 100 + seed);
                dispersion(&h).fano.unwrap()
            })
            .collect();
        let mean = ds.iter().sum::<f64>() / ds.len() as f64;
        assert!(
            (0.98..=1.02).contains(&mean),
            "lambda {lambda}: mean D = {mean}"
        );
    }
}

#[test]
fn delta_one_is_one_nat_from_poisson_one() {
    let h = CountHistogram::from_counts(vec![1; 50], W).unwrap();
    assert!((kl_to_poisson(&h).unwrap() - 1.0).abs() < 1e-9);
    let base = histogram_with_baseline(&h).unwrap();
    let e = (-1.0f64).exp();
    for (k, want) in [(0, e), (1, e), (2, e / 2.0), (3, e / 6.0)] {
        assert!((base.poisson[k] - want).abs() < 1e-12);
    }
    assert_eq!(base.empirical[1], 1.0);
    assert!(base
        .empirical
        .iter()
        .enumerate()
        .all(|(k, &p)| k == 1 || p == 0.0));
}

#[test]
fn all_zero_counts_have_zero_kl() {
    let h = CountHistogram::from_counts(vec![0; 30], W).unwrap();
    assert_eq!(kl_to_poisson(&h).unwrap(), 0.0);
}

#[test]
fn poisson_histogram_tracks_its_baseline() {
    let h = correct_counts(SyntheticKind::PoissonStream { lambda: 5.0 }, 10_000, 3);
    let base = histogram_with_baseline(&h).unwrap();
    assert!(base.max_abs_gap() < 0.02, "gap {}", base.max_abs_gap());
}

#[test]
fn generators_are_deterministic() {
    let spec = SyntheticSpec::new(SyntheticKind::BernoulliLabels { p: 0.4 }, 200, 9);
    assert_eq!(
        generate_labeled_stream(&spec).unwrap(),
        generate_labeled_stream(&spec).unwrap()
    );
    let other = SyntheticSpec {
        seed: 10,
        ..spec.clone()
    };
    assert_ne!(
        generate_labeled_stream(&spec).unwrap(),
        generate_labeled_stream(&other).unwrap()
    );
}
