//! Discrete Stockwell transform summaries per frequency band.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp::spectrum::{fft_real, ifft_in_place};
use crate::dsp::stats;

use super::spectral::FrequencyBands;

/// Voices are thinned to at least this spacing on long windows.
pub const MIN_VOICE_SPACING_HZ: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StockwellStat {
    /// mean over voices of sqrt(std over time of |S|^2)
    Mst,
    /// skewness over time of the band-summed |S|^2
    Sst,
}

/// |S(tau, k)|^2 for voice `k` of the spectrum `spec` (length n, unnormalized FFT).
fn voice_power(spec: &[Complex64], k: usize) -> Vec<f64> {
    let n = spec.len();
    let kf = k as f64;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|m| {
            let ms = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            let g = (-2.0 * PI * PI * ms * ms / (kf * kf)).exp();
            spec[(m + k) % n] * g
        })
        .collect();
    ifft_in_place(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

/// Voice indices with frequency in `[lo, hi)` on the thinned grid.
fn band_voices(n: usize, fs: f64, lo: f64, hi: f64) -> Vec<usize> {
    let df = fs / n as f64;
    let step = ((MIN_VOICE_SPACING_HZ / df).round() as usize).max(1);
    (1..=n / 2).filter(|k| k % step == 0).filter(|&k| {
        let f = k as f64 * df;
        f >= lo && f < hi
    })
    .collect()
}

/// Both statistics for one channel, one value per band.
pub fn stockwell_channel(x: &[f64], fs: f64, bands: &FrequencyBands) -> ([f64; 5], [f64; 5]) {
    let n = x.len();
    let spec = fft_real(x, n);
    let mut mst = [0.0; 5];
    let mut sst = [0.0; 5];
    for (b, &(lo, hi)) in bands.edges.iter().enumerate() {
        let voices = band_voices(n, fs, lo, hi);
        if voices.is_empty() {
            mst[b] = f64::NAN;
            sst[b] = f64::NAN;
            continue;
        }
        let mut summed = vec![0.0; n];
        let mut acc = 0.0;
        for &k in &voices {
            let p = voice_power(&spec, k);
            acc += stats::std_dev(&p, 0).sqrt();
            for (s, v) in summed.iter_mut().zip(&p) {
                *s += v;
            }
        }
        mst[b] = acc / voices.len() as f64;
        // a flat power envelope is treated as perfectly symmetric
        let sk = stats::skewness(&summed);
        sst[b] = if sk.is_nan() { 0.0 } else { sk };
    }
    (mst, sst)
}

pub fn extract_stockwell(window: &[Vec<f64>], fs: f64, bands: &FrequencyBands, stat: StockwellStat) -> Vec<f64> {
    window
        .iter()
        .flat_map(|ch| {
            let (mst, sst) = stockwell_channel(ch, fs, bands);
            match stat {
                StockwellStat::Mst => mst,
                StockwellStat::Sst => sst,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 200.0;

    fn alpha(n: usize, amp: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..n).map(|i| amp(i) * (2.0 * PI * 10.0 * i as f64 / FS).sin()).collect()
    }

    #[test]
    fn stationary_sine_has_small_skew() {
        let x = alpha(2000, |_| 1.0);
        let (_, sst) = stockwell_channel(&x, FS, &FrequencyBands::for_fs(FS));
        assert!(sst[2].abs() < 0.5, "{}", sst[2]);
    }

    #[test]
    fn short_loud_stretch_skews_alpha_power() {
        let x = alpha(2000, |i| if i >= 1500 { 4.0 } else { 0.5 });
        let (_, sst) = stockwell_channel(&x, FS, &FrequencyBands::for_fs(FS));
        assert!(sst[2] > 0.5, "{}", sst[2]);
    }

    #[test]
    fn zero_signal_has_zero_mst() {
        let out = extract_stockwell(&[vec![0.0; 400]], FS, &FrequencyBands::for_fs(FS), StockwellStat::Mst);
        assert_eq!(out, vec![0.0; 5]);
    }

    #[test]
    fn voice_of_pure_tone_is_flat() {
        // a sine exactly on a voice has constant |S| = amplitude / 2
        let n = 400;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 20.0 * i as f64 / n as f64).cos()).collect();
        let p = voice_power(&fft_real(&x, n), 20);
        for v in p {
            assert!((v.sqrt() - 0.5).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn long_windows_thin_voices() {
        let v = band_voices(12000, FS, 8.0, 13.0);
        assert_eq!(v.len(), 20);
        assert!(v.windows(2).all(|w| w[1] - w[0] == 15));
        assert_eq!(band_voices(200, FS, 8.0, 13.0), vec![8, 9, 10, 11, 12]);
    }
}
