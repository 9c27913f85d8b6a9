use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{Label, SegmentKind};
use crate::preprocess::{MontageKind, PreprocessError, PreprocessedRecording};

use super::{apply_combiner, window_features, Combiner, Family, FeatureConfig, FeatureError};

const CACHE_MAGIC: &[u8; 4] = b"STFM";
const CACHE_VERSION: u32 = 1;

/// Subjects x features. Missing values stay NaN here and are imputed at
/// model-fit time from the training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub config: FeatureConfig,
    pub segment: SegmentKind,
    pub subject_ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
    pub feature_names: Vec<String>,
    /// row-major, one row per subject
    pub x: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    config: FeatureConfig,
    segment: SegmentKind,
    subject_ids: Vec<String>,
    labels: Vec<Option<Label>>,
    feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// 0/1 targets (1 = epileptic).
    pub fn targets(&self) -> Result<Vec<u8>, FeatureError> {
        self.labels
            .iter()
            .zip(&self.subject_ids)
            .map(|(l, s)| l.map(|l| l.as_target()).ok_or_else(|| FeatureError::MissingLabel(s.clone())))
            .collect()
    }

    /// Rows whose subject id is in `keep`, preserving order.
    pub fn filter_subjects(&self, keep: &HashSet<String>) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep.contains(&self.subject_ids[i])).collect();
        FeatureMatrix {
            config: self.config,
            segment: self.segment,
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
        }
    }

    /// Header `subject_id,label,<feature names>`; NaN written as `NaN`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("subject_id,label");
        for n in &self.feature_names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for ((id, label), row) in self.subject_ids.iter().zip(&self.labels).zip(&self.x) {
            s.push_str(id);
            s.push(',');
            if let Some(l) = label {
                s.push_str(&l.as_target().to_string());
            }
            for v in row {
                s.push(',');
                s.push_str(&format!("{v}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = CacheHeader {
            config: self.config,
            segment: self.segment,
            subject_ids: self.subject_ids.clone(),
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.n_rows() * self.n_features());
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for row in &self.x {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FeatureMatrix, FeatureError> {
        let bad = |m: &str| FeatureError::Cache(m.to_string());
        if bytes.len() < 16 || &bytes[..4] != CACHE_MAGIC {
            return Err(bad("not a feature cache file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CACHE_VERSION {
            return Err(FeatureError::Cache(format!("unsupported cache version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: CacheHeader = serde_json::from_slice(body).map_err(|e| FeatureError::Cache(e.to_string()))?;
        let (rows, cols) = (header.subject_ids.len(), header.feature_names.len());
        let data = &bytes[16 + hlen..];
        if data.len() != 8 * rows * cols || header.labels.len() != rows {
            return Err(bad("payload size does not match header"));
        }
        let x = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        let o = 8 * (r * cols + c);
                        f64::from_le_bytes(data[o..o + 8].try_into().expect("8 bytes"))
                    })
                    .collect()
            })
            .collect();
        Ok(FeatureMatrix {
            config: header.config,
            segment: header.segment,
            subject_ids: header.subject_ids,
            labels: header.labels,
            feature_names: header.feature_names,
            x,
        })
    }

    /// Cache file stem for a dataset content hash and this configuration.
    pub fn cache_key(dataset_hash: &str, config: &FeatureConfig, segment: SegmentKind) -> String {
        let mut h = Sha256::new();
        h.update(dataset_hash.as_bytes());
        h.update(b"\0");
        h.update(config.id().as_bytes());
        h.update(b"\0");
        h.update(segment.name().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), FeatureError> {
        write_file(path, self.to_csv().as_bytes())
    }

    pub fn write_cache(&self, path: &Path) -> Result<(), FeatureError> {
        write_file(path, &self.to_bytes())
    }

    pub fn read_cache(path: &Path) -> Result<FeatureMatrix, FeatureError> {
        let bytes = std::fs::read(path).map_err(|e| FeatureError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_bytes(&bytes)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FeatureError> {
    let io = |e: std::io::Error| FeatureError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

/// First recording per subject, in input order.
fn first_per_subject(recordings: &[PreprocessedRecording]) -> Vec<&PreprocessedRecording> {
    let mut seen = HashSet::new();
    recordings.iter().filter(|r| seen.insert(r.recording.subject_id.clone())).collect()
}

/// One matrix per combiner from a single extraction pass over
/// `(family, montage, window length)`.
pub fn build_feature_matrices(
    recordings: &[PreprocessedRecording],
    family: Family,
    montage: MontageKind,
    window_length_s: u32,
    segment: SegmentKind,
    combiners: &[Combiner],
) -> Result<Vec<FeatureMatrix>, FeatureError> {
    let subjects = first_per_subject(recordings);
    let per_subject: Vec<Option<(Vec<String>, Vec<Vec<f64>>)>> = subjects
        .par_iter()
        .map(|prep| {
            let id = &prep.recording.subject_id;
            match window_features(prep, segment, family, montage, window_length_s) {
                Ok(wf) if wf.rows.is_empty() => {
                    warn!("subject {id}: no artifact-free {window_length_s} s windows in {} segment, dropped", segment.name());
                    Ok(None)
                }
                Ok(wf) => Ok(Some((wf.names, wf.rows))),
                Err(FeatureError::Preprocess(e @ (PreprocessError::MissingSegment(_) | PreprocessError::SegmentTooShort { .. }))) => {
                    warn!("subject {id}: {e}, dropped");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, FeatureError>>()?;

    let base = FeatureConfig::new(family, montage, window_length_s, Combiner::Mean);
    let names = per_subject
        .iter()
        .flatten()
        .map(|(n, _)| n.clone())
        .next()
        .ok_or_else(|| FeatureError::NoSubjects(format!("{} on {}", base.id(), segment.name())))?;
    let mut kept: Vec<(&PreprocessedRecording, &Vec<Vec<f64>>)> = Vec::new();
    for (prep, item) in subjects.iter().zip(&per_subject) {
        if let Some((n, rows)) = item {
            if n != &names {
                return Err(FeatureError::InconsistentFeatures {
                    subject: prep.recording.subject_id.clone(),
                    found: n.len(),
                    expected: names.len(),
                });
            }
            kept.push((prep, rows));
        }
    }
    Ok(combiners
        .iter()
        .map(|&combiner| FeatureMatrix {
            config: FeatureConfig { combiner, ..base },
            segment,
            subject_ids: kept.iter().map(|(p, _)| p.recording.subject_id.clone()).collect(),
            labels: kept.iter().map(|(p, _)| p.recording.label).collect(),
            feature_names: names.clone(),
            x: kept.iter().map(|(_, rows)| apply_combiner(rows, combiner)).collect(),
        })
        .collect())
}

pub fn build_feature_matrix(
    recordings: &[PreprocessedRecording],
    config: &FeatureConfig,
    segment: SegmentKind,
) -> Result<FeatureMatrix, FeatureError> {
    let mut v = build_feature_matrices(recordings, config.family, config.montage, config.window_length_s, segment, &[config.combiner])?;
    Ok(v.remove(0))
}
