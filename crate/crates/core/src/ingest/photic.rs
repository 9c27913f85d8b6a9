//! Flash-train detection on the photic trigger channel.
//!
//! Frames of 1 s every 0.25 s are Hann-windowed and transformed; a frame is
//! active when its peak magnitude within 0.5-30 Hz exceeds ten times the
//! median magnitude over all (frame, bin) cells in that band. Runs of active
//! frames form candidate trains whose edges are then refined to the first and
//! last supra-threshold trigger sample, and whose flash rate is the lowest
//! strong spectral line of the burst (the fundamental of the pulse train).

use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::{fft_real, forward_plan, hann, refine_peak};
use crate::dsp::stats;

use super::IngestError;

const FRAME_S: f64 = 1.0;
const HOP_S: f64 = 0.25;
const BAND_LO_HZ: f64 = 0.5;
const BAND_HI_HZ: f64 = 30.0;
const ACTIVE_FACTOR: f64 = 10.0;
const MIN_TRIGGER_FS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhoticTrain {
    pub start_sample: usize,
    pub end_sample: usize,
    pub flash_frequency_hz: f64,
}

impl PhoticTrain {
    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.end_sample <= self.start_sample
    }
}

pub fn detect_ips_trains(signal: &[f64], fs: f64) -> Result<Vec<PhoticTrain>, IngestError> {
    if fs < MIN_TRIGGER_FS {
        return Err(IngestError::TriggerRateTooLow { fs });
    }
    let frame = (FRAME_S * fs).round() as usize;
    let hop = ((HOP_S * fs).round() as usize).max(1);
    if signal.len() < frame {
        return Ok(Vec::new());
    }
    let baseline = stats::median(signal);
    let centered: Vec<f64> = signal.iter().map(|v| v - baseline).collect();

    let win = hann(frame);
    let plan = forward_plan(frame);
    let df = fs / frame as f64;
    let lo_bin = (BAND_LO_HZ / df).ceil() as usize;
    let hi_bin = ((BAND_HI_HZ / df).floor() as usize).min(frame / 2);
    let n_frames = (signal.len() - frame) / hop + 1;

    let mut peaks = Vec::with_capacity(n_frames);
    let mut cells = Vec::with_capacity(n_frames * (hi_bin + 1 - lo_bin));
    let mut buf = vec![num_complex::Complex64::new(0.0, 0.0); frame];
    for f in 0..n_frames {
        let seg = &centered[f * hop..f * hop + frame];
        let mean = seg.iter().sum::<f64>() / frame as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&win) {
            *b = num_complex::Complex64::new((v - mean) * w, 0.0);
        }
        plan.process(&mut buf);
        let mut peak = 0.0f64;
        for c in &buf[lo_bin..=hi_bin] {
            let m = c.norm();
            cells.push(m);
            peak = peak.max(m);
        }
        peaks.push(peak);
    }
    let global_max = peaks.iter().copied().fold(0.0, f64::max);
    if global_max <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = (ACTIVE_FACTOR * stats::median(&cells)).max(1e-6 * global_max);

    let mut runs = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for (f, &p) in peaks.iter().enumerate() {
        if p > threshold {
            current = Some(match current {
                Some((s, _)) => (s, f),
                None => (f, f),
            });
        } else if let Some(run) = current.take() {
            runs.push(run);
        }
    }
    runs.extend(current);

    let mut trains = Vec::new();
    for (first, last) in runs {
        let lo = first * hop;
        let hi = (last * hop + frame).min(signal.len());
        let amp = centered[lo..hi].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if amp <= 0.0 {
            continue;
        }
        let half = 0.5 * amp;
        let start = lo + centered[lo..hi].iter().position(|v| v.abs() >= half).unwrap_or(0);
        let end = lo + centered[lo..hi].iter().rposition(|v| v.abs() >= half).unwrap_or(hi - lo - 1) + 1;
        let Some(freq) = fundamental(&centered[start..end], fs) else {
            continue;
        };
        trains.push(PhoticTrain { start_sample: start, end_sample: end, flash_frequency_hz: freq });
    }
    Ok(trains)
}

/// Lowest spectral peak within 0.5-30 Hz reaching half the strongest one.
fn fundamental(x: &[f64], fs: f64) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let w = hann(x.len());
    let tapered: Vec<f64> = x.iter().zip(&w).map(|(v, w)| (v - mean) * w).collect();
    // at least 0.05 Hz grid spacing for the parabolic refinement
    let nfft = tapered.len().max((fs / 0.05).ceil() as usize).next_power_of_two();
    let spec = fft_real(&tapered, nfft);
    let df = fs / nfft as f64;
    let mag: Vec<f64> = spec[..nfft / 2 + 1].iter().map(|c| c.norm()).collect();
    let lo = (BAND_LO_HZ / df).ceil() as usize;
    let hi = ((BAND_HI_HZ / df).floor() as usize).min(mag.len() - 2);
    if lo >= hi {
        return None;
    }
    let strongest = mag[lo..=hi].iter().copied().fold(0.0, f64::max);
    if strongest <= 0.0 {
        return None;
    }
    (lo.max(1)..=hi)
        .find(|&k| mag[k] >= 0.5 * strongest && mag[k] >= mag[k - 1] && mag[k] >= mag[k + 1])
        .map(|k| refine_peak(&mag, k) * df)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rectangular 10 ms pulses at `freq` Hz from `start_s` for `dur_s`.
    fn pulses(sig: &mut [f64], fs: f64, start_s: f64, dur_s: f64, freq: f64) {
        let width = (0.01 * fs).round().max(1.0) as usize;
        let n_pulses = (dur_s * freq).round() as usize;
        for p in 0..n_pulses {
            let at = ((start_s + p as f64 / freq) * fs).round() as usize;
            for v in sig.iter_mut().skip(at).take(width) {
                *v = 100.0;
            }
        }
    }

    #[test]
    fn all_zero_channel_gives_no_trains() {
        assert!(detect_ips_trains(&vec![0.0; 2000], 200.0).unwrap().is_empty());
    }

    #[test]
    fn low_rate_is_rejected() {
        assert!(matches!(
            detect_ips_trains(&[0.0; 100], 40.0),
            Err(IngestError::TriggerRateTooLow { .. })
        ));
    }

    #[test]
    fn continuous_train_covers_file() {
        let fs = 200.0;
        let mut sig = vec![0.0; 30 * 200];
        pulses(&mut sig, fs, 0.0, 30.0, 15.0);
        let t = detect_ips_trains(&sig, fs).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t[0].len() as f64 >= 0.9 * sig.len() as f64);
        assert!((t[0].flash_frequency_hz - 15.0).abs() < 0.5);
    }

    #[test]
    fn one_hertz_flashes_detected() {
        let fs = 250.0;
        let mut sig = vec![0.0; 40 * 250];
        pulses(&mut sig, fs, 10.0, 10.0, 1.0);
        let t = detect_ips_trains(&sig, fs).unwrap();
        assert_eq!(t.len(), 1, "{t:?}");
        assert!((t[0].flash_frequency_hz - 1.0).abs() < 0.5, "{t:?}");
    }
}
