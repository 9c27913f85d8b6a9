//! FFT helpers, Welch periodogram and the analytic signal.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Forward FFT of a real signal, zero-padded to `n` (>= x.len()).
pub fn fft_real(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n.max(x.len()), Complex64::new(0.0, 0.0));
    forward_plan(buf.len()).process(&mut buf);
    buf
}

/// In-place inverse FFT including the 1/n normalization.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    inverse_plan(n).process(buf);
    let inv = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= inv;
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided power spectral density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Integrated power over bins with `lo <= f < hi`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let df = self.resolution();
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p * df)
            .sum()
    }
}

/// Welch's method: Hann-tapered segments of `nperseg` samples with 50 %
/// overlap, per-segment mean removal, density scaling. Signals shorter than
/// one segment fall back to a single segment of their own length.
pub fn welch(x: &[f64], fs: f64, nperseg: usize) -> Psd {
    let nperseg = nperseg.min(x.len()).max(1);
    let step = (nperseg / 2).max(1);
    let win = hann(nperseg);
    let win_pow: f64 = win.iter().map(|w| w * w).sum();
    let nfreq = nperseg / 2 + 1;
    let mut acc = vec![0.0; nfreq];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); nperseg];
    let plan = forward_plan(nperseg);
    let mut start = 0;
    while start + nperseg <= x.len() {
        let seg = &x[start..start + nperseg];
        let mean = seg.iter().sum::<f64>() / nperseg as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&win) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        plan.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (fs * win_pow * count.max(1) as f64);
    let power: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || (nperseg % 2 == 0 && k == nperseg / 2) { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let freqs = (0..nfreq).map(|k| k as f64 * fs / nperseg as f64).collect();
    Psd { freqs, power }
}

/// Analytic signal via the frequency-domain Hilbert transform.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut spec = fft_real(x, n);
    // h = [1, 2, ..., 2, (1 at Nyquist when n even), 0, ...]
    let half = n / 2;
    for (k, v) in spec.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= h;
    }
    ifft_in_place(&mut spec);
    spec
}

/// Frequency of the largest magnitude bin in `[lo, hi]`, refined by a
/// parabolic fit through the neighbouring bins.
pub fn peak_frequency(x: &[f64], fs: f64, lo: f64, hi: f64, nfft: usize) -> Option<(f64, f64)> {
    let spec = fft_real(x, nfft.max(x.len()));
    let n = spec.len();
    let df = fs / n as f64;
    let mag: Vec<f64> = spec[..n / 2 + 1].iter().map(|c| c.norm()).collect();
    let (mut best, mut best_mag) = (None, 0.0);
    for (k, &m) in mag.iter().enumerate() {
        let f = k as f64 * df;
        if f >= lo && f <= hi && m > best_mag {
            best = Some(k);
            best_mag = m;
        }
    }
    let k = best?;
    Some((refine_peak(&mag, k) * df, best_mag))
}

/// Sub-bin peak location by parabolic interpolation on magnitudes.
pub(crate) fn refine_peak(mag: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= mag.len() {
        return k as f64;
    }
    let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return k as f64;
    }
    let delta = 0.5 * (a - c) / denom;
    k as f64 + delta.clamp(-0.5, 0.5)
}
