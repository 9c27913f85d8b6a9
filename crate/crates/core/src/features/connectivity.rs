//! Pairwise maximum cross-correlation and band-limited phase locking.

use num_complex::Complex64;

use crate::dsp::filter::{BandKind, Sos};
use crate::dsp::spectrum::{analytic_signal, forward_plan, ifft_in_place};

use super::spectral::FrequencyBands;
use super::FeatureError;

pub const CC_MAX_LAG_S: f64 = 0.25;
pub const PLV_FILTER_ORDER: usize = 4;
pub const PLV_EDGE_FRACTION: f64 = 0.1;

/// Unordered channel pairs `(i, j)` with `i < j`, row-major.
pub fn pairs(n_channels: usize) -> Vec<(usize, usize)> {
    (0..n_channels).flat_map(|i| (i + 1..n_channels).map(move |j| (i, j))).collect()
}

fn has_spread(x: &[f64]) -> bool {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    var > (1e-12 * scale).powi(2) && var > 0.0
}

/// Pearson correlation over the overlap for each lag in `[-max_lag, max_lag]`,
/// where lag `l` pairs `x[i]` with `y[i + l]`. Index `max_lag + l`.
pub fn lagged_correlation(x: &[f64], y: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let max_lag = max_lag.min(n.saturating_sub(2));
    let nfft = (2 * n).next_power_of_two();
    let plan = forward_plan(nfft);
    let to_buf = |s: &[f64]| {
        let mut b: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        b.resize(nfft, Complex64::new(0.0, 0.0));
        plan.process(&mut b);
        b
    };
    let fx = to_buf(x);
    let fy = to_buf(y);
    // r[l] = sum_i x[i] y[i + l]
    let mut cross: Vec<Complex64> = fx.iter().zip(&fy).map(|(a, b)| a.conj() * b).collect();
    ifft_in_place(&mut cross);
    let prefix = |s: &[f64], sq: bool| {
        let mut p = vec![0.0; n + 1];
        for (i, v) in s.iter().enumerate() {
            p[i + 1] = p[i] + if sq { v * v } else { *v };
        }
        p
    };
    let (sx, sxx, sy, syy) = (prefix(x, false), prefix(x, true), prefix(y, false), prefix(y, true));
    let mut out = Vec::with_capacity(2 * max_lag + 1);
    for l in -(max_lag as isize)..=(max_lag as isize) {
        // x range [xa, xb), y range shifted by l
        let (xa, xb) = if l >= 0 { (0, n - l as usize) } else { ((-l) as usize, n) };
        let (ya, yb) = ((xa as isize + l) as usize, (xb as isize + l) as usize);
        let m = (xb - xa) as f64;
        let sxy = if l >= 0 { cross[l as usize].re } else { cross[nfft - (-l) as usize].re };
        let (mx, my) = ((sx[xb] - sx[xa]) / m, (sy[yb] - sy[ya]) / m);
        let cov = sxy - m * mx * my;
        let vx = sxx[xb] - sxx[xa] - m * mx * mx;
        let vy = syy[yb] - syy[ya] - m * my * my;
        let denom = (vx * vy).sqrt();
        let scale = (sxx[xb] - sxx[xa]).sqrt() * (syy[yb] - syy[ya]).sqrt();
        out.push(if denom > 1e-12 * scale && denom > 0.0 { (cov / denom).clamp(-1.0, 1.0) } else { 0.0 });
    }
    out
}

/// Per pair: maximum absolute lagged correlation within +-0.25 s. The flag
/// reports a zero-variance channel (its pairs are 0).
pub fn extract_cc(window: &[Vec<f64>], fs: f64) -> (Vec<f64>, bool) {
    let max_lag = (CC_MAX_LAG_S * fs).round() as usize;
    let ok: Vec<bool> = window.iter().map(|c| has_spread(c)).collect();
    let mut flagged = false;
    let values = pairs(window.len())
        .into_iter()
        .map(|(i, j)| {
            if !(ok[i] && ok[j]) {
                flagged = true;
                return 0.0;
            }
            lagged_correlation(&window[i], &window[j], max_lag).iter().fold(0.0f64, |a, v| a.max(v.abs()))
        })
        .collect();
    (values, flagged)
}

/// Unit phasors of the band-limited analytic signal, edges trimmed.
fn band_phasors(x: &[f64], sos: &Sos) -> Vec<Complex64> {
    let y = sos.filtfilt(x);
    let z = analytic_signal(&y);
    let n = z.len();
    let edge = (PLV_EDGE_FRACTION * n as f64).floor() as usize;
    z[edge..n - edge]
        .iter()
        .map(|c| {
            let r = c.norm();
            if r > 0.0 {
                c / r
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Per band then per pair: phase-locking value. Pair values are laid out
/// band-major: all pairs of delta, then theta, and so on.
pub fn extract_plv(window: &[Vec<f64>], fs: f64, bands: &FrequencyBands) -> Result<(Vec<f64>, bool), FeatureError> {
    let ok: Vec<bool> = window.iter().map(|c| has_spread(c)).collect();
    let pr = pairs(window.len());
    let mut flagged = false;
    let mut out = Vec::with_capacity(pr.len() * 5);
    for &(lo, hi) in &bands.edges {
        let sos = Sos::butterworth(PLV_FILTER_ORDER, BandKind::Bandpass, &[lo, hi], fs)?;
        let ph: Vec<Vec<Complex64>> = window.iter().map(|c| band_phasors(c, &sos)).collect();
        for &(i, j) in &pr {
            if !(ok[i] && ok[j]) || ph[i].is_empty() {
                flagged = true;
                out.push(0.0);
                continue;
            }
            let s: Complex64 = ph[i].iter().zip(&ph[j]).map(|(a, b)| a * b.conj()).sum();
            out.push((s.norm() / ph[i].len() as f64).clamp(0.0, 1.0));
        }
    }
    Ok((out, flagged))
}

/// Symmetric matrix with zero diagonal from a row-major pair vector.
pub fn pairs_to_matrix(values: &[f64], n_channels: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n_channels]; n_channels];
    for (&(i, j), &v) in pairs(n_channels).iter().zip(values) {
        m[i][j] = v;
        m[j][i] = v;
    }
    m
}
