//! Slow, definition-level reference computations.

use std::f64::consts::PI;

/// Fraction of (positive, negative) pairs ranked correctly, ties half.
pub fn concordance_auc(scores: &[f64], y: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

fn sig(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Two-model stacking objective as a function of the first weight.
pub fn stack_objective_1d(p: &[Vec<f64>], y: &[u8], alpha: f64, w1: f64) -> f64 {
    let mut s = 0.0;
    for (r, &t) in p.iter().zip(y) {
        let z = w1 * r[0] + (1.0 - w1) * r[1];
        s += if t == 1 { -sig(z).ln() } else { -sig(1.0 - z).ln() };
    }
    s / y.len() as f64 - alpha * (w1.ln() + (1.0 - w1).ln())
}

/// Grid minimizer of [`stack_objective_1d`] on (0, 1), refined three times.
pub fn stack_grid_oracle(p: &[Vec<f64>], y: &[u8], alpha: f64) -> f64 {
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    let mut best = 0.5;
    for _ in 0..4 {
        let steps = 10_000;
        let h = (hi - lo) / steps as f64;
        best = (0..=steps)
            .map(|i| lo + i as f64 * h)
            .min_by(|a, b| stack_objective_1d(p, y, alpha, *a).total_cmp(&stack_objective_1d(p, y, alpha, *b)))
            .unwrap();
        lo = (best - 2.0 * h).max(1e-12);
        hi = (best + 2.0 * h).min(1.0 - 1e-12);
    }
    best
}

/// Frequency of the largest direct-DFT magnitude on a `step` Hz grid in
/// `[lo, hi]`, mean removed.
pub fn dft_peak(x: &[f64], fs: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let mut best = (lo, -1.0);
    let mut f = lo;
    while f <= hi + 1e-9 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let a = 2.0 * PI * f * i as f64 / fs;
            re += (v - m) * a.cos();
            im -= (v - m) * a.sin();
        }
        let mag = re * re + im * im;
        if mag > best.1 {
            best = (f, mag);
        }
        f += step;
    }
    best.0
}

/// Lag in `[-max_lag, max_lag]` maximizing `sum_i x[i] y[i + lag]`.
pub fn xcorr_peak_lag(x: &[f64], y: &[f64], max_lag: isize) -> isize {
    let n = x.len() as isize;
    (-max_lag..=max_lag)
        .map(|l| {
            let s: f64 = (0..n).filter(|i| (0..n).contains(&(i + l))).map(|i| x[i as usize] * y[(i + l) as usize]).sum();
            (l, s)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}

pub fn percentile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < v.len() {
        v[i] * (1.0 - frac) + v[i + 1] * frac
    } else {
        v[i]
    }
}
