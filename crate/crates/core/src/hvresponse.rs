//! Hyperventilation slowing index and responder stratification.

use std::fmt::Write;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::spectrum::welch;
use crate::dsp::stats;
use crate::features::{Band, FrequencyBands};
use crate::ingest::{Recording, SegmentKind};
use crate::preprocess::{Montage, MontageKind, PreprocessError};

pub const TRIM_FRACTION: f64 = 0.15;
pub const EPOCH_S: f64 = 5.0;
pub const BASELINE_EPOCHS: usize = 6;
pub const SAMPLE_EPOCHS: usize = 8;
pub const SAMPLE_CENTER: f64 = 0.75;
pub const MIN_EPOCHS: usize = 3;

#[derive(Debug, Error)]
pub enum HvError {
    #[error("subject {0} has no HV segment")]
    MissingHv(String),
    #[error("stratification needs at least 2 valid subjects, got {0}")]
    TooFewValid(usize),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Epoch layout of one HV segment, in samples relative to the segment start
/// and in epoch indices relative to the trimmed span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HvEpochPlan {
    pub trimmed: Range<usize>,
    pub epoch_len: usize,
    pub n_epochs: usize,
    pub baseline: Range<usize>,
    pub sample: Range<usize>,
}

impl HvEpochPlan {
    /// Trim 15 % at both ends, cut 5 s epochs, baseline = first 6 epochs,
    /// sample = 8 epochs around index round(0.75 n) (4 before, 3 after the
    /// centre), clipped to the segment and to the epochs after the baseline.
    pub fn new(hv_len: usize, fs: f64) -> HvEpochPlan {
        let trim = (TRIM_FRACTION * hv_len as f64).round() as usize;
        let trimmed = trim.min(hv_len)..hv_len.saturating_sub(trim).max(trim.min(hv_len));
        let epoch_len = (EPOCH_S * fs).round() as usize;
        let n_epochs = if epoch_len == 0 { 0 } else { trimmed.len() / epoch_len };
        let baseline = 0..BASELINE_EPOCHS.min(n_epochs);
        let centre = (SAMPLE_CENTER * n_epochs as f64).round() as usize;
        let lo = centre.saturating_sub(SAMPLE_EPOCHS / 2).max(baseline.end);
        let hi = (centre + SAMPLE_EPOCHS / 2).min(n_epochs);
        HvEpochPlan { trimmed, epoch_len, n_epochs, baseline, sample: lo..hi.max(lo) }
    }

    pub fn is_valid(&self) -> bool {
        self.baseline.len() >= MIN_EPOCHS && self.sample.len() >= MIN_EPOCHS
    }

    /// Sample span of epoch `i` relative to the segment start.
    pub fn epoch_span(&self, i: usize) -> Range<usize> {
        let a = self.trimmed.start + i * self.epoch_len;
        a..a + self.epoch_len
    }
}

/// Baseline and sample epochs of a recording's HV segment on the common
/// average reference (epochs x channels x samples).
#[derive(Debug, Clone, PartialEq)]
pub struct HvEpochs {
    pub plan: HvEpochPlan,
    pub baseline: Vec<Vec<Vec<f64>>>,
    pub sample: Vec<Vec<Vec<f64>>>,
}

pub fn epoch_hv(rec: &Recording) -> Result<HvEpochs, HvError> {
    let seg = rec.segment(SegmentKind::Hv).ok_or_else(|| HvError::MissingHv(rec.subject_id.clone()))?;
    let plan = HvEpochPlan::new(seg.len(), rec.fs);
    let car = Montage::build(MontageKind::Car, &rec.channels)?;
    let take = |r: Range<usize>| -> Vec<Vec<Vec<f64>>> {
        r.map(|i| {
            let span = plan.epoch_span(i);
            let raw: Vec<Vec<f64>> = rec.data.iter().map(|ch| ch[seg.start + span.start..seg.start + span.end].to_vec()).collect();
            car.apply(&raw)
        })
        .collect()
    };
    Ok(HvEpochs { baseline: take(plan.baseline.clone()), sample: take(plan.sample.clone()), plan })
}

/// Absolute band power averaged over epochs and channels (Welch, 1 s Hann
/// segments inside each epoch).
pub fn mean_band_power(epochs: &[Vec<Vec<f64>>], fs: f64, band: (f64, f64)) -> f64 {
    let nperseg = fs.round() as usize;
    let vals: Vec<f64> = epochs
        .iter()
        .flat_map(|e| e.iter().map(|ch| welch(ch, fs, nperseg).band_power(band.0, band.1)))
        .collect();
    if vals.is_empty() {
        0.0
    } else {
        stats::mean(&vals)
    }
}

/// Percent change from baseline; `None` when the baseline power is zero.
pub fn band_power_change(baseline: f64, sample: f64) -> Option<f64> {
    (baseline > 0.0).then(|| (sample - baseline) / baseline * 100.0)
}

pub fn slowing_index(d_delta: f64, d_theta: f64, d_alpha: f64) -> f64 {
    -d_alpha + d_theta + d_delta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSlowing {
    pub subject_id: String,
    pub label: Option<u8>,
    pub baseline_epochs: usize,
    pub sample_epochs: usize,
    pub delta_pct: Option<f64>,
    pub theta_pct: Option<f64>,
    pub alpha_pct: Option<f64>,
    pub s_raw: Option<f64>,
    pub s_z: Option<f64>,
    pub responder: Option<bool>,
    pub valid: bool,
}

/// Slowing index of one recording; invalid (not an error) when either
/// window is too short or a baseline band power is zero.
pub fn subject_slowing(rec: &Recording) -> Result<SubjectSlowing, HvError> {
    let ep = epoch_hv(rec)?;
    let bands = FrequencyBands::for_fs(rec.fs);
    let mut out = SubjectSlowing {
        subject_id: rec.subject_id.clone(),
        label: rec.label.map(|l| l.as_target()),
        baseline_epochs: ep.baseline.len(),
        sample_epochs: ep.sample.len(),
        delta_pct: None,
        theta_pct: None,
        alpha_pct: None,
        s_raw: None,
        s_z: None,
        responder: None,
        valid: false,
    };
    if !ep.plan.is_valid() {
        return Ok(out);
    }
    let change = |b: Band| {
        let r = bands.get(b);
        band_power_change(mean_band_power(&ep.baseline, rec.fs, r), mean_band_power(&ep.sample, rec.fs, r))
    };
    out.delta_pct = change(Band::Delta);
    out.theta_pct = change(Band::Theta);
    out.alpha_pct = change(Band::Alpha);
    if let (Some(d), Some(t), Some(a)) = (out.delta_pct, out.theta_pct, out.alpha_pct) {
        let s = slowing_index(d, t, a);
        out.s_raw = Some(s);
        out.responder = Some(s > 0.0);
        out.valid = true;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowingReport {
    pub subjects: Vec<SubjectSlowing>,
    pub mean: f64,
    /// population standard deviation over valid subjects
    pub std: f64,
    /// false when the valid S values have zero spread
    pub z_defined: bool,
}

/// Standardize S over valid subjects. Responder flags come from the sign of
/// the raw S only.
pub fn stratify(subjects: Vec<SubjectSlowing>) -> Result<SlowingReport, HvError> {
    let mut subjects = subjects;
    let s: Vec<f64> = subjects.iter().filter(|x| x.valid).filter_map(|x| x.s_raw).collect();
    if s.len() < 2 {
        return Err(HvError::TooFewValid(s.len()));
    }
    let (mean, std) = (stats::mean(&s), stats::std_dev(&s, 0));
    let z_defined = std > 0.0;
    for x in subjects.iter_mut() {
        x.responder = x.s_raw.filter(|_| x.valid).map(|v| v > 0.0);
        x.s_z = x.s_raw.filter(|_| x.valid && z_defined).map(|v| (v - mean) / std);
    }
    Ok(SlowingReport { subjects, mean, std, z_defined })
}

/// Per-subject slowing over a cohort; recordings without an HV segment are
/// skipped.
pub fn slowing_report(recordings: &[Recording]) -> Result<SlowingReport, HvError> {
    let subjects: Vec<SubjectSlowing> = recordings
        .par_iter()
        .filter(|r| r.segment(SegmentKind::Hv).is_some())
        .map(subject_slowing)
        .collect::<Result<_, _>>()?;
    stratify(subjects)
}

impl SlowingReport {
    pub fn responders(&self) -> Vec<&str> {
        self.subjects.iter().filter(|s| s.responder == Some(true)).map(|s| s.subject_id.as_str()).collect()
    }

    pub fn non_responders(&self) -> Vec<&str> {
        self.subjects.iter().filter(|s| s.responder == Some(false)).map(|s| s.subject_id.as_str()).collect()
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut s = String::from(
            "subject_id,label,baseline_epochs,sample_epochs,delta_pct,theta_pct,alpha_pct,s_raw,s_z,responder,valid\n",
        );
        for x in &self.subjects {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                x.subject_id,
                x.label.map_or(String::new(), |l| l.to_string()),
                x.baseline_epochs,
                x.sample_epochs,
                opt(x.delta_pct),
                opt(x.theta_pct),
                opt(x.alpha_pct),
                opt(x.s_raw),
                opt(x.s_z),
                x.responder.map_or(String::new(), |r| r.to_string()),
                x.valid
            );
        }
        s
    }
}
