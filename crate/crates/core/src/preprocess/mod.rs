//! Preprocessing chain: notch, zero-phase high-pass, RMS artifact rejection,
//! resampling, then montage derivation and windowing at feature time.

mod artifact;
mod filters;
mod montage;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::resample::resample as resample_signal;
use crate::dsp::DspError;
use crate::ingest::{Electrode, Recording, Segment, SegmentKind};

pub use artifact::{rms_artifact_reject, Rejection, RmsRule};
pub use filters::{bandpass_zero_phase, highpass_zero_phase, notch_filter, NOTCH_Q};
pub use montage::{apply_montage, laplacian_neighbors, Montage, MontageKind, DOUBLE_BANANA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
    #[error("{montage:?} montage requires channel {channel}")]
    MissingChannel { montage: MontageKind, channel: Electrode },
    #[error("segment too short: {available} samples, one window needs {needed}")]
    SegmentTooShort { needed: usize, available: usize },
    #[error("recording has no {0:?} segment")]
    MissingSegment(SegmentKind),
}

/// Window lengths in seconds used for feature extraction.
pub const WINDOW_LENGTHS_S: [u32; 6] = [1, 2, 5, 10, 20, 60];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub notch_hz: f64,
    pub highpass_hz: f64,
    pub highpass_order: usize,
    pub target_fs: f64,
    pub rms_window_s: f64,
    pub rms_rule: RmsRule,
}

impl PreprocessConfig {
    /// 50 Hz mains, 200 Hz analysis rate.
    pub fn emc() -> Self {
        PreprocessConfig {
            notch_hz: 50.0,
            highpass_hz: 1.0,
            highpass_order: 4,
            target_fs: 200.0,
            rms_window_s: 1.0,
            rms_rule: RmsRule::default(),
        }
    }

    /// 60 Hz mains, 250 Hz analysis rate.
    pub fn tuh() -> Self {
        PreprocessConfig { notch_hz: 60.0, target_fs: 250.0, ..Self::emc() }
    }

    pub fn validate(&self, source_fs: f64) -> Result<(), PreprocessError> {
        let bad = |m: String| Err(PreprocessError::InvalidConfig(m));
        if !(self.target_fs > 0.0 && self.highpass_hz > 0.0 && self.notch_hz > 0.0 && self.rms_window_s > 0.0) {
            return bad("all rates must be positive".into());
        }
        if self.target_fs > source_fs {
            return bad(format!("target_fs {} exceeds source rate {source_fs}", self.target_fs));
        }
        if self.highpass_hz >= self.notch_hz {
            return bad(format!("highpass {} Hz must be below notch {} Hz", self.highpass_hz, self.notch_hz));
        }
        if self.highpass_order == 0 {
            return bad("highpass_order must be >= 1".into());
        }
        Ok(())
    }
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self::emc()
    }
}

/// Cleaned recording at the analysis rate with the rejected spans mapped onto
/// the new sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedRecording {
    pub recording: Recording,
    pub rejected_spans: Vec<(usize, usize)>,
    pub rejection_windows: usize,
    pub rejected_windows: usize,
}

impl PreprocessedRecording {
    pub fn rejection_fraction(&self) -> f64 {
        if self.rejection_windows == 0 {
            0.0
        } else {
            self.rejected_windows as f64 / self.rejection_windows as f64
        }
    }

    fn clean(&self, start: usize, end: usize) -> bool {
        !self.rejected_spans.iter().any(|&(a, b)| a < end && start < b)
    }
}

/// Rational-ratio resampling of one signal.
pub fn resample(signal: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>, PreprocessError> {
    Ok(resample_signal(signal, fs_in, fs_out)?)
}

fn rescale(x: usize, ratio: f64, cap: usize) -> usize {
    ((x as f64 * ratio).round() as usize).min(cap)
}

/// Full chain on referential signals: notch, high-pass, rejection, resample.
pub fn preprocess_recording(rec: &Recording, config: &PreprocessConfig) -> Result<PreprocessedRecording, PreprocessError> {
    config.validate(rec.fs)?;
    let fs = rec.fs;
    let filtered: Vec<Vec<f64>> = rec
        .data
        .par_iter()
        .map(|ch| {
            let x = notch_filter(ch, fs, config.notch_hz)?;
            highpass_zero_phase(&x, fs, config.highpass_hz, config.highpass_order)
        })
        .collect::<Result<_, _>>()?;
    let rejection = rms_artifact_reject(&filtered, fs, config.rms_window_s, &config.rms_rule)?;
    let data: Vec<Vec<f64>> = filtered
        .par_iter()
        .map(|ch| resample(ch, fs, config.target_fs))
        .collect::<Result<_, _>>()?;

    let ratio = config.target_fs / fs;
    let n_out = data.first().map_or(0, Vec::len);
    let segments = rec
        .segments
        .iter()
        .map(|s| Segment { kind: s.kind, start: rescale(s.start, ratio, n_out), end: rescale(s.end, ratio, n_out) })
        .filter(|s| !s.is_empty())
        .collect();
    let rejected_spans = rejection
        .rejected_spans()
        .into_iter()
        .map(|(a, b)| (rescale(a, ratio, n_out), rescale(b, ratio, n_out)))
        .collect();
    Ok(PreprocessedRecording {
        recording: Recording {
            subject_id: rec.subject_id.clone(),
            channels: rec.channels.clone(),
            fs: config.target_fs,
            data,
            segments,
            label: rec.label,
            ied_free: rec.ied_free,
        },
        rejected_spans,
        rejection_windows: rejection.mask.len(),
        rejected_windows: rejection.rejected_count(),
    })
}

/// Re-referenced windows of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSegment {
    pub montage: MontageKind,
    pub segment: SegmentKind,
    pub window_length_s: f64,
    pub channel_names: Vec<String>,
    pub fs: f64,
    /// each window is channels x samples
    pub windows: Vec<Vec<Vec<f64>>>,
}

/// Consecutive non-overlapping windows; the trailing remainder is dropped.
pub fn window_segment(data: &[Vec<f64>], fs: f64, window_length_s: f64) -> Result<Vec<Vec<Vec<f64>>>, PreprocessError> {
    let len = (window_length_s * fs).round() as usize;
    let n = data.first().map_or(0, Vec::len);
    if len == 0 || n < len {
        return Err(PreprocessError::SegmentTooShort { needed: len, available: n });
    }
    Ok((0..n / len)
        .map(|w| data.iter().map(|ch| ch[w * len..(w + 1) * len].to_vec()).collect())
        .collect())
}

/// Windows of `kind` from a preprocessed recording, re-referenced with
/// `montage`; windows touching a rejected span are skipped.
pub fn segment_windows(
    prep: &PreprocessedRecording,
    kind: SegmentKind,
    montage: MontageKind,
    window_length_s: f64,
) -> Result<WindowedSegment, PreprocessError> {
    let rec = &prep.recording;
    let seg = *rec.segment(kind).ok_or(PreprocessError::MissingSegment(kind))?;
    let m = Montage::build(montage, &rec.channels)?;
    let len = (window_length_s * rec.fs).round() as usize;
    if len == 0 || seg.len() < len {
        return Err(PreprocessError::SegmentTooShort { needed: len, available: seg.len() });
    }
    let mut windows = Vec::new();
    for w in 0..seg.len() / len {
        let (a, b) = (seg.start + w * len, seg.start + (w + 1) * len);
        if !prep.clean(a, b) {
            continue;
        }
        let raw: Vec<Vec<f64>> = rec.data.iter().map(|ch| ch[a..b].to_vec()).collect();
        windows.push(m.apply(&raw));
    }
    Ok(WindowedSegment {
        montage,
        segment: kind,
        window_length_s,
        channel_names: m.names,
        fs: rec.fs,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn window_counts() {
        let fs = 10.0;
        let seg = vec![vec![0.0; 650]];
        assert_eq!(window_segment(&seg, fs, 20.0).unwrap().len(), 3);
        assert_eq!(window_segment(&vec![vec![0.0; 600]], fs, 60.0).unwrap().len(), 1);
        assert!(matches!(
            window_segment(&vec![vec![0.0; 590]], fs, 60.0),
            Err(PreprocessError::SegmentTooShort { .. })
        ));
    }

    #[test]
    fn windows_are_time_ordered_slices() {
        let row: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let w = window_segment(&[row], 5.0, 2.0).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1][0][0], 10.0);
        assert_eq!(w[1][0].len(), 10);
    }

    #[test]
    fn config_validation() {
        assert!(PreprocessConfig::emc().validate(256.0).is_ok());
        assert!(PreprocessConfig::tuh().validate(200.0).is_err());
        let bad = PreprocessConfig { highpass_hz: 70.0, ..PreprocessConfig::emc() };
        assert!(bad.validate(500.0).is_err());
    }

    fn sine_recording(fs: f64, seconds: usize, f: f64, amp: f64) -> Recording {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let n = (fs * seconds as f64) as usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 5.0).unwrap();
        let data = (0..19)
            .map(|_| (0..n).map(|i| amp * (2.0 * PI * f * i as f64 / fs).sin() + noise.sample(&mut rng)).collect())
            .collect();
        Recording {
            subject_id: "s".into(),
            channels: Electrode::ALL.to_vec(),
            fs,
            data,
            segments: vec![Segment { kind: SegmentKind::Resting, start: 0, end: n }],
            label: None,
            ied_free: true,
        }
    }

    fn tone_amplitude(x: &[f64], f: f64, fs: f64) -> f64 {
        let (mut c, mut s) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * f * i as f64 / fs;
            c += v * ph.cos();
            s += v * ph.sin();
        }
        2.0 * c.hypot(s) / x.len() as f64
    }

    #[test]
    fn chain_preserves_passband_amplitude() {
        let rec = sine_recording(500.0, 30, 10.0, 40.0);
        let out = preprocess_recording(&rec, &PreprocessConfig::tuh()).unwrap();
        assert_eq!(out.recording.fs, 250.0);
        assert_eq!(out.recording.n_samples(), 7500);
        assert_eq!(out.recording.segments[0].end, 7500);
        assert!(out.rejected_windows <= 1, "{}", out.rejected_windows);
        let amp = tone_amplitude(&out.recording.data[0][1000..6500], 10.0, 250.0);
        assert!((amp / 40.0 - 1.0).abs() < 0.02, "{amp}");
    }

    #[test]
    fn rejected_windows_are_skipped() {
        let mut rec = sine_recording(200.0, 20, 10.0, 20.0);
        for v in &mut rec.data[3][200 * 7..200 * 7 + 40] {
            *v += 4000.0;
        }
        let prep = preprocess_recording(&rec, &PreprocessConfig::emc()).unwrap();
        assert!(prep.rejected_windows >= 1);
        let ws = segment_windows(&prep, SegmentKind::Resting, MontageKind::Car, 1.0).unwrap();
        assert_eq!(ws.windows.len(), 20 - prep.rejected_windows);
        let ws5 = segment_windows(&prep, SegmentKind::Resting, MontageKind::Car, 5.0).unwrap();
        assert_eq!(ws5.windows.len(), 3);
    }
}
