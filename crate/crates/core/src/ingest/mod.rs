//! EDF ingestion: channel selection, unit conversion, photic-train detection
//! and segment location.

mod channels;
pub mod edf;
mod photic;
mod segments;
pub mod sidecar;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use channels::{normalize_label, select_channels, ChannelSelection, Electrode, PhoticChannel};
pub use edf::{parse_edf, write_edf, EdfError, EdfFile, EdfHeader, EdfSignalSpec, SignalHeader, StartDateTime};
pub use photic::{detect_ips_trains, PhoticTrain};
pub use segments::locate_segments;
pub use sidecar::Sidecar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error(transparent)]
    Edf(#[from] EdfError),
    #[error("insufficient montage coverage: {matched} of the 19 standard electrodes found")]
    InsufficientCoverage { matched: usize },
    #[error("unknown unit {unit:?} on channel {label:?}")]
    UnknownUnit { label: String, unit: String },
    #[error("10-20 channels sampled at different rates: {0:?}")]
    MixedRates(Vec<f64>),
    #[error("trigger channel sampled at {fs} Hz cannot resolve a 21 Hz flash sweep (need >= 50 Hz)")]
    TriggerRateTooLow { fs: f64 },
    #[error("overlapping segments: {first:?} [{first_start}, {first_end}) and {second:?} [{second_start}, {second_end})")]
    OverlappingSegments {
        first: SegmentKind,
        first_start: usize,
        first_end: usize,
        second: SegmentKind,
        second_start: usize,
        second_end: usize,
    },
    #[error("segment {kind:?} [{start}, {end}) outside recording of {len} samples")]
    SegmentOutOfRange { kind: SegmentKind, start: usize, end: usize, len: usize },
    #[error("malformed recording: {0}")]
    Malformed(String),
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentKind {
    Resting,
    Ips,
    Hv,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 3] = [SegmentKind::Resting, SegmentKind::Ips, SegmentKind::Hv];

    pub fn name(self) -> &'static str {
        match self {
            SegmentKind::Resting => "resting",
            SegmentKind::Ips => "ips",
            SegmentKind::Hv => "hv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "resting" | "rest" => Some(SegmentKind::Resting),
            "ips" | "photic" => Some(SegmentKind::Ips),
            "hv" | "hyperventilation" => Some(SegmentKind::Hv),
            _ => None,
        }
    }
}

/// Half-open sample span `[start, end)` of one segment kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Segment) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Epileptic,
    NonEpileptic,
}

impl Label {
    /// 1 for epileptic, 0 otherwise.
    pub fn as_target(self) -> u8 {
        match self {
            Label::Epileptic => 1,
            Label::NonEpileptic => 0,
        }
    }
}

/// Multichannel EEG in microvolts on the canonical 10-20 channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub channels: Vec<Electrode>,
    pub fs: f64,
    /// channels x samples
    pub data: Vec<Vec<f64>>,
    pub segments: Vec<Segment>,
    pub label: Option<Label>,
    pub ied_free: bool,
}

impl Recording {
    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn segment(&self, kind: SegmentKind) -> Option<&Segment> {
        self.segments.iter().find(|s| s.kind == kind)
    }

    pub fn channel_index(&self, e: Electrode) -> Option<usize> {
        self.channels.iter().position(|&c| c == e)
    }

    /// Copy of the samples in `seg` for every channel.
    pub fn slice(&self, seg: &Segment) -> Vec<Vec<f64>> {
        self.data.iter().map(|row| row[seg.start..seg.end].to_vec()).collect()
    }

    /// Checks the structural invariants: data rows match channels, equal row
    /// lengths, segments inside the data and pairwise disjoint.
    pub fn validate(&self) -> Result<(), IngestError> {
        let n = self.n_samples();
        if !(self.fs > 0.0) || self.data.len() != self.channels.len() || self.data.iter().any(|r| r.len() != n) {
            return Err(IngestError::Malformed(format!(
                "recording {}: {} channels, {} rows, fs {}",
                self.subject_id,
                self.channels.len(),
                self.data.len(),
                self.fs
            )));
        }
        for s in &self.segments {
            if s.is_empty() || s.end > n {
                return Err(IngestError::SegmentOutOfRange { kind: s.kind, start: s.start, end: s.end, len: n });
            }
        }
        for (i, a) in self.segments.iter().enumerate() {
            for b in &self.segments[i + 1..] {
                if a.overlaps(b) {
                    return Err(overlap_error(a, b));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn overlap_error(a: &Segment, b: &Segment) -> IngestError {
    IngestError::OverlappingSegments {
        first: a.kind,
        first_start: a.start,
        first_end: a.end,
        second: b.kind,
        second_start: b.start,
        second_end: b.end,
    }
}

/// Everything ingestion produces for one file.
#[derive(Debug, Clone)]
pub struct IngestedRecording {
    pub recording: Recording,
    pub photic: Option<PhoticChannel>,
    pub trains: Vec<PhoticTrain>,
    pub unmatched_labels: Vec<String>,
}

/// Parse, select channels, detect trains and locate segments for one EDF
/// byte stream plus its sidecar metadata.
pub fn ingest_bytes(bytes: &[u8], sidecar: &Sidecar) -> Result<IngestedRecording, IngestError> {
    let file = parse_edf(bytes)?;
    let sel = select_channels(&file)?;
    let mut recording = sel.recording;
    recording.subject_id = sidecar.subject_id.clone();
    recording.label = sidecar.label;
    recording.ied_free = sidecar.ied_free;

    let trains = match &sel.photic {
        Some(p) => {
            let trains = detect_ips_trains(&p.signal, p.fs)?;
            // trigger may run at its own rate
            let ratio = recording.fs / p.fs;
            trains
                .into_iter()
                .map(|t| PhoticTrain {
                    start_sample: (t.start_sample as f64 * ratio).round() as usize,
                    end_sample: ((t.end_sample as f64 * ratio).round() as usize).min(recording.n_samples()),
                    flash_frequency_hz: t.flash_frequency_hz,
                })
                .collect()
        }
        None => Vec::new(),
    };
    let hv = sidecar.hv_span_samples(recording.fs, recording.n_samples());
    let recording = locate_segments(recording, &trains, hv)?;
    Ok(IngestedRecording {
        recording,
        photic: sel.photic,
        trains,
        unmatched_labels: sel.unmatched_labels,
    })
}
