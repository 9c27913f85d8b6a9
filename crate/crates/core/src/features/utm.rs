//! Univariate temporal measures.

use crate::dsp::stats;

pub const UTM_STATS: [&str; 9] = [
    "median",
    "iqr",
    "mad",
    "peaks",
    "zero_crossings",
    "teager",
    "energy",
    "power",
    "entropy",
];

const HIST_BINS: usize = 64;

/// Nine statistics per channel, in `UTM_STATS` order.
pub fn extract_utm(window: &[Vec<f64>]) -> Vec<f64> {
    window.iter().flat_map(|ch| channel_utm(ch)).collect()
}

pub fn channel_utm(x: &[f64]) -> [f64; 9] {
    let n = x.len();
    if n == 0 {
        return [f64::NAN; 9];
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = stats::quantile_sorted(&sorted, 0.5);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let energy: f64 = x.iter().map(|v| v * v).sum();
    [
        median,
        iqr,
        stats::mad(x),
        peak_count(x) as f64,
        zero_crossings(x) as f64,
        mean_teager(x),
        energy,
        energy / n as f64,
        histogram_entropy(x, HIST_BINS),
    ]
}

/// Strict local maxima.
pub fn peak_count(x: &[f64]) -> usize {
    x.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count()
}

/// Sign changes between consecutive samples, zero counted as positive.
pub fn zero_crossings(x: &[f64]) -> usize {
    x.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count()
}

/// Mean of `x[n]^2 - x[n-1] x[n+1]` over interior samples.
pub fn mean_teager(x: &[f64]) -> f64 {
    if x.len() < 3 {
        return 0.0;
    }
    let s: f64 = x.windows(3).map(|w| w[1] * w[1] - w[0] * w[2]).sum();
    s / (x.len() - 2) as f64
}

/// Shannon entropy (nats) of an equal-width amplitude histogram.
pub fn histogram_entropy(x: &[f64], bins: usize) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for &v in x {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = x.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn sine(a: f64, f: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|i| a * (2.0 * PI * f * i as f64 / fs + phase).sin()).collect()
    }

    #[test]
    fn zero_crossings_of_whole_periods() {
        for k in 1..12 {
            let x = sine(1.0, k as f64, 200.0, 200, 1.0);
            assert_eq!(zero_crossings(&x), 2 * k);
        }
    }

    #[test]
    fn constant_signal() {
        let f = channel_utm(&[3.0; 100]);
        assert_eq!(f[4], 0.0);
        assert_eq!(f[5], 0.0);
        assert_eq!(f[8], 0.0);
        assert_eq!(f[0], 3.0);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn teager_of_sine_matches_closed_form() {
        // A^2 sin^2(w) exactly for a pure sampled sine
        let (a, f, fs) = (7.0, 5.0, 200.0);
        let x = sine(a, f, fs, 2000, 0.2);
        let w = 2.0 * PI * f / fs;
        let closed = a * a * w.sin().powi(2);
        assert!((mean_teager(&x) / closed - 1.0).abs() < 1e-9);
        let small_angle = a * a * w * w;
        assert!((mean_teager(&x) / small_angle - 1.0).abs() < 0.01);
    }

    #[test]
    fn robust_stats_match_numpy() {
        let f = channel_utm(&[1.0, 2.0, 3.0, 4.0, 10.0]);
        assert_eq!(f[0], 3.0);
        assert_eq!(f[1], 2.0);
        assert_eq!(f[2], 1.0);
        assert_eq!(f[6], 130.0);
        assert_eq!(f[7], 26.0);
    }

    #[test]
    fn entropy_of_uniform_two_levels() {
        let x: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        assert!((histogram_entropy(&x, 64) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn peaks_of_sine() {
        let x = sine(1.0, 5.0, 200.0, 200, 0.3);
        assert_eq!(peak_count(&x), 5);
    }
}
