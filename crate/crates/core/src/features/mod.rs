//! Per-window feature families, cross-window combiners and subject-level
//! feature matrices.

mod combiner;
pub mod connectivity;
pub mod graph;
mod matrix;
pub mod spectral;
pub mod stockwell;
pub mod utm;
pub mod wavelet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::DspError;
use crate::ingest::SegmentKind;
use crate::preprocess::{segment_windows, MontageKind, PreprocessError, PreprocessedRecording};

pub use combiner::{apply_combiner, Combiner};
pub use connectivity::{extract_cc, extract_plv, pairs, pairs_to_matrix};
pub use graph::{graph_metrics, GraphMetrics};
pub use matrix::{build_feature_matrices, build_feature_matrix, FeatureMatrix};
pub use spectral::{extract_spectral, Band, FrequencyBands};
pub use stockwell::{extract_stockwell, StockwellStat};
pub use utm::extract_utm;
pub use wavelet::{extract_cwt, extract_dwt};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window of {available} samples is too short, need {needed}")]
    WindowTooShort { needed: usize, available: usize },
    #[error("connectivity needs at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("no subject yielded features for {0}")]
    NoSubjects(String),
    #[error("subject {subject} produced {found} features, expected {expected}")]
    InconsistentFeatures { subject: String, found: usize, expected: usize },
    #[error("subject {0} has no label")]
    MissingLabel(String),
    #[error("feature cache: {0}")]
    Cache(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Utm,
    Spectral,
    Cwt,
    Dwt,
    Mst,
    Sst,
    Cc,
    Plv,
    Gcc,
    Gplv,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::Utm,
        Family::Spectral,
        Family::Cwt,
        Family::Dwt,
        Family::Mst,
        Family::Sst,
        Family::Cc,
        Family::Plv,
        Family::Gcc,
        Family::Gplv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Utm => "UTM",
            Family::Spectral => "Spectral",
            Family::Cwt => "CWT",
            Family::Dwt => "DWT",
            Family::Mst => "mST",
            Family::Sst => "sST",
            Family::Cc => "CC",
            Family::Plv => "PLV",
            Family::Gcc => "GCC",
            Family::Gplv => "GPLV",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Family::ALL.iter().copied().find(|f| f.name().eq_ignore_ascii_case(s))
    }

    fn is_pairwise(self) -> bool {
        matches!(self, Family::Cc | Family::Plv | Family::Gcc | Family::Gplv)
    }
}

/// One cell of the configuration grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub family: Family,
    pub montage: MontageKind,
    pub window_length_s: u32,
    pub combiner: Combiner,
}

impl FeatureConfig {
    pub fn new(family: Family, montage: MontageKind, window_length_s: u32, combiner: Combiner) -> Self {
        FeatureConfig { family, montage, window_length_s, combiner }
    }

    /// e.g. `Spectral-CAR-10s-Mean`
    pub fn id(&self) -> String {
        format!("{}-{}-{}s-{}", self.family.name(), self.montage.name(), self.window_length_s, self.combiner.name())
    }

    pub fn parse_id(s: &str) -> Option<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 4 {
            return None;
        }
        Some(FeatureConfig {
            family: Family::parse(parts[0])?,
            montage: MontageKind::parse(parts[1])?,
            window_length_s: parts[2].strip_suffix('s')?.parse().ok()?,
            combiner: Combiner::parse(parts[3])?,
        })
    }
}

impl std::fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

/// Feature names of `family` for the given derived channel names, in the
/// order produced by [`extract_window`].
pub fn feature_names(family: Family, channels: &[String]) -> Vec<String> {
    let per_channel = |suffixes: Vec<String>| -> Vec<String> {
        channels.iter().flat_map(|c| suffixes.iter().map(move |s| format!("{c}_{s}"))).collect()
    };
    let pair_names = || -> Vec<String> { pairs(channels.len()).iter().map(|&(i, j)| format!("{}~{}", channels[i], channels[j])).collect() };
    match family {
        Family::Utm => per_channel(utm::UTM_STATS.iter().map(|s| s.to_string()).collect()),
        Family::Spectral => per_channel(Band::ALL.iter().map(|b| format!("{}_rel", b.name())).collect()),
        Family::Cwt => per_channel(
            wavelet::cwt_frequencies()
                .iter()
                .flat_map(|f| [format!("cwt{f:.2}Hz_msq"), format!("cwt{f:.2}Hz_sdsq")])
                .collect(),
        ),
        Family::Dwt => per_channel((1..=wavelet::DWT_LEVELS).flat_map(|l| [format!("d{l}_msq"), format!("d{l}_sdsq")]).collect()),
        Family::Mst => per_channel(Band::ALL.iter().map(|b| format!("{}_mst", b.name())).collect()),
        Family::Sst => per_channel(Band::ALL.iter().map(|b| format!("{}_sst", b.name())).collect()),
        Family::Cc => pair_names().into_iter().map(|p| format!("{p}_cc")).collect(),
        Family::Plv => Band::ALL
            .iter()
            .flat_map(|b| pair_names().into_iter().map(move |p| format!("{}_{p}_plv", b.name())))
            .collect(),
        Family::Gcc => GraphMetrics::names(channels).into_iter().map(|n| format!("gcc_{n}")).collect(),
        Family::Gplv => Band::ALL
            .iter()
            .flat_map(|b| GraphMetrics::names(channels).into_iter().map(move |n| format!("gplv_{}_{n}", b.name())))
            .collect(),
    }
}

/// Features of one channels x samples window. The flag marks degenerate
/// inputs (silent channel, zero total power).
pub fn extract_window(family: Family, window: &[Vec<f64>], fs: f64) -> Result<(Vec<f64>, bool), FeatureError> {
    let bands = FrequencyBands::for_fs(fs);
    if family.is_pairwise() && window.len() < 2 {
        return Err(FeatureError::TooFewChannels(window.len()));
    }
    let n = window.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(FeatureError::WindowTooShort { needed: 1, available: 0 });
    }
    Ok(match family {
        Family::Utm => (extract_utm(window), false),
        Family::Spectral => extract_spectral(window, fs, &bands),
        Family::Cwt => (extract_cwt(window, fs), false),
        Family::Dwt => (extract_dwt(window)?, false),
        Family::Mst => (extract_stockwell(window, fs, &bands, StockwellStat::Mst), false),
        Family::Sst => (extract_stockwell(window, fs, &bands, StockwellStat::Sst), false),
        Family::Cc => extract_cc(window, fs),
        Family::Plv => extract_plv(window, fs, &bands)?,
        Family::Gcc => {
            let (cc, flag) = extract_cc(window, fs);
            (graph_metrics(&pairs_to_matrix(&cc, window.len())).to_vec(), flag)
        }
        Family::Gplv => {
            let (plv, flag) = extract_plv(window, fs, &bands)?;
            let per_band = plv.len() / 5;
            let v = plv
                .chunks(per_band.max(1))
                .flat_map(|band| graph_metrics(&pairs_to_matrix(band, window.len())).to_vec())
                .collect();
            (v, flag)
        }
    })
}

/// Per-window features of one recording segment.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFeatures {
    pub names: Vec<String>,
    /// window x feature
    pub rows: Vec<Vec<f64>>,
    pub flagged_windows: usize,
}

pub fn window_features(
    prep: &PreprocessedRecording,
    segment: SegmentKind,
    family: Family,
    montage: MontageKind,
    window_length_s: u32,
) -> Result<WindowFeatures, FeatureError> {
    let ws = segment_windows(prep, segment, montage, window_length_s as f64)?;
    let names = feature_names(family, &ws.channel_names);
    let out: Vec<(Vec<f64>, bool)> = ws
        .windows
        .par_iter()
        .map(|w| extract_window(family, w, ws.fs))
        .collect::<Result<_, _>>()?;
    let flagged_windows = out.iter().filter(|(_, f)| *f).count();
    Ok(WindowFeatures { names, rows: out.into_iter().map(|(v, _)| v).collect(), flagged_windows })
}
