//! Morlet CWT and periodized Daubechies-4 DWT energy summaries.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp::spectrum::{fft_real, ifft_in_place};
use crate::dsp::stats;

use super::FeatureError;

pub const CWT_SCALES: usize = 13;
pub const DWT_LEVELS: usize = 6;
pub const MORLET_W0: f64 = 6.0;

/// db4 reconstruction low-pass (orthonormal, 8 taps).
const DB4: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// Log-spaced centre frequencies from 1 to 45 Hz.
pub fn cwt_frequencies() -> [f64; CWT_SCALES] {
    let mut f = [0.0; CWT_SCALES];
    for (k, v) in f.iter_mut().enumerate() {
        *v = 45f64.powf(k as f64 / (CWT_SCALES - 1) as f64);
    }
    f
}

/// Complex Morlet coefficients for one centre frequency, normalized so a
/// unit sine at the centre frequency has modulus one.
pub fn morlet_cwt(x: &[f64], fs: f64, centre_hz: f64) -> Vec<Complex64> {
    let n = x.len();
    let nfft = (2 * n).next_power_of_two();
    let spec = fft_real(x, nfft);
    let scale = MORLET_W0 / (2.0 * PI * centre_hz);
    let mut buf = spec;
    for (k, v) in buf.iter_mut().enumerate() {
        let gain = if k > 0 && k < nfft / 2 {
            let w = 2.0 * PI * k as f64 * fs / nfft as f64;
            2.0 * (-0.5 * (scale * w - MORLET_W0).powi(2)).exp()
        } else {
            0.0
        };
        *v *= gain;
    }
    ifft_in_place(&mut buf);
    buf.truncate(n);
    buf
}

/// Per channel and scale: mean and standard deviation of |W|^2.
pub fn extract_cwt(window: &[Vec<f64>], fs: f64) -> Vec<f64> {
    let freqs = cwt_frequencies();
    let mut out = Vec::with_capacity(window.len() * 2 * CWT_SCALES);
    for ch in window {
        for &f in &freqs {
            let p: Vec<f64> = morlet_cwt(ch, fs, f).iter().map(|c| c.norm_sqr()).collect();
            out.push(stats::mean(&p));
            out.push(stats::std_dev(&p, 0));
        }
    }
    out
}

fn highpass_taps() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (j, v) in g.iter_mut().enumerate() {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        *v = s * DB4[7 - j];
    }
    g
}

/// One periodized analysis step; odd inputs are extended by repeating the
/// last sample.
pub fn dwt_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut x = x.to_vec();
    if x.len() % 2 == 1 {
        x.push(*x.last().expect("non-empty"));
    }
    let n = x.len();
    let g = highpass_taps();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..8 {
            let v = x[(2 * k + j) % n];
            a += DB4[j] * v;
            d += g[j] * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

/// Detail coefficients for levels 1..=levels followed by the final
/// approximation.
pub fn wavedec(x: &[f64], levels: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>), FeatureError> {
    let needed = 1usize << levels;
    if x.len() < needed {
        return Err(FeatureError::WindowTooShort { needed, available: x.len() });
    }
    let mut a = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (na, d) = dwt_step(&a);
        details.push(d);
        a = na;
    }
    Ok((details, a))
}

/// Per channel and detail level: mean and standard deviation of squared
/// coefficients.
pub fn extract_dwt(window: &[Vec<f64>]) -> Result<Vec<f64>, FeatureError> {
    let mut out = Vec::with_capacity(window.len() * 2 * DWT_LEVELS);
    for ch in window {
        let (details, _) = wavedec(ch, DWT_LEVELS)?;
        for d in &details {
            let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
            out.push(stats::mean(&sq));
            out.push(stats::std_dev(&sq, 0));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn db4_is_orthonormal() {
        let g = highpass_taps();
        let dot = |a: &[f64], b: &[f64], shift: usize| -> f64 { (0..8 - shift).map(|j| a[j + shift] * b[j]).sum() };
        assert!((dot(&DB4, &DB4, 0) - 1.0).abs() < 1e-12);
        assert!((DB4.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-12);
        for m in [2, 4, 6] {
            assert!(dot(&DB4, &DB4, m).abs() < 1e-12, "{m}");
        }
        for m in [0, 2, 4, 6] {
            assert!(dot(&DB4, &g, m).abs() < 1e-12, "{m}");
            assert!(dot(&g, &DB4, m).abs() < 1e-12, "{m}");
        }
    }

    fn energy(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn impulse_energy_is_preserved() {
        for pos in [0, 1, 17, 100, 255] {
            let mut x = vec![0.0; 256];
            x[pos] = 1.0;
            let (details, a) = wavedec(&x, 6).unwrap();
            let total: f64 = details.iter().map(|d| energy(d)).sum::<f64>() + energy(&a);
            assert!((total - 1.0).abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn random_energy_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..1024).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (details, a) = wavedec(&x, 6).unwrap();
        let total: f64 = details.iter().map(|d| energy(d)).sum::<f64>() + energy(&a);
        assert!((total / energy(&x) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn too_short_for_six_levels() {
        assert!(matches!(wavedec(&[0.0; 63], 6), Err(FeatureError::WindowTooShort { needed: 64, .. })));
        assert_eq!(extract_dwt(&[vec![0.0; 200]]).unwrap().len(), 12);
    }

    #[test]
    fn zero_signal_gives_zeros() {
        assert!(extract_dwt(&[vec![0.0; 200]]).unwrap().iter().all(|v| *v == 0.0));
        let c = extract_cwt(&[vec![0.0; 200]], 200.0);
        assert_eq!(c.len(), 26);
        assert!(c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sine_peaks_at_nearest_scale() {
        let fs = 200.0;
        for f0 in [10.0, 20.0, 30.0] {
            let x: Vec<f64> = (0..2000).map(|i| (2.0 * PI * f0 * i as f64 / fs).sin()).collect();
            let feats = extract_cwt(&[x], fs);
            let means: Vec<f64> = feats.iter().step_by(2).copied().collect();
            let freqs = cwt_frequencies();
            let nearest = (0..CWT_SCALES)
                .min_by(|&a, &b| (freqs[a] - f0).abs().total_cmp(&(freqs[b] - f0).abs()))
                .unwrap();
            let best = (0..CWT_SCALES).max_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap();
            assert_eq!(best, nearest, "f0={f0}");
        }
    }

    #[test]
    fn unit_sine_at_centre_has_unit_modulus() {
        let fs = 200.0;
        let f = cwt_frequencies()[7];
        let x: Vec<f64> = (0..4000).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        let w = morlet_cwt(&x, fs, f);
        assert!((w[2000].norm() - 1.0).abs() < 1e-3, "{}", w[2000].norm());
    }
}
