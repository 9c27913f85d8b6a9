//! Dataset scan: one entry per EDF file with its sidecar, or an exclusion
//! with the reason.

use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stimeeg::ingest::{ingest_bytes, IngestedRecording, Label, PhoticTrain, Segment, Sidecar};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub subject_id: String,
    /// path relative to the dataset root
    pub file: String,
    pub sha256: String,
    pub label: Option<Label>,
    pub ied_free: bool,
    pub fs: f64,
    pub n_samples: usize,
    pub channels: Vec<String>,
    pub unmatched_labels: Vec<String>,
    pub segments: Vec<Segment>,
    pub trains: Vec<PhoticTrain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub file: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_root: PathBuf,
    /// hash over the (file, sha256) pairs of the included subjects
    pub dataset_hash: String,
    pub subjects: Vec<SubjectEntry>,
    pub exclusions: Vec<Exclusion>,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn sidecar_path(edf: &Path) -> PathBuf {
    edf.with_extension("toml")
}

/// Read and ingest one EDF file with its sidecar.
pub fn load(root: &Path, file: &str) -> Result<(IngestedRecording, String), String> {
    let path = root.join(file);
    let bytes = std::fs::read(&path).map_err(|e| format!("unreadable: {e}"))?;
    let side_path = sidecar_path(&path);
    let side_text = std::fs::read_to_string(&side_path).map_err(|e| format!("sidecar {}: {e}", side_path.display()))?;
    let sidecar = Sidecar::parse(&side_text).map_err(|e| e.to_string())?;
    let rec = ingest_bytes(&bytes, &sidecar).map_err(|e| e.to_string())?;
    Ok((rec, sha256_hex(&bytes)))
}

fn edf_files(root: &Path) -> std::io::Result<Vec<String>> {
    let mut files: Vec<String> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x.eq_ignore_ascii_case("edf")))
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    files.sort();
    Ok(files)
}

pub fn scan(root: &Path, ied_free_only: bool) -> std::io::Result<Manifest> {
    let files = edf_files(root)?;
    if files.is_empty() {
        warn!("no EDF files under {}", root.display());
    }
    let loaded: Vec<(String, Result<(IngestedRecording, String), String>)> =
        files.par_iter().map(|f| (f.clone(), load(root, f))).collect();
    let mut subjects = Vec::new();
    let mut exclusions = Vec::new();
    for (file, res) in loaded {
        match res {
            Ok((ing, sha)) => {
                let r = ing.recording;
                if ied_free_only && !r.ied_free {
                    warn!("{file}: not IED-free, excluded");
                    exclusions.push(Exclusion { file, reason: "not IED-free".into() });
                    continue;
                }
                if subjects.iter().any(|s: &SubjectEntry| s.subject_id == r.subject_id) {
                    warn!("{file}: duplicate subject {}, excluded", r.subject_id);
                    exclusions.push(Exclusion { file, reason: format!("duplicate subject id {}", r.subject_id) });
                    continue;
                }
                subjects.push(SubjectEntry {
                    subject_id: r.subject_id.clone(),
                    file,
                    sha256: sha,
                    label: r.label,
                    ied_free: r.ied_free,
                    fs: r.fs,
                    n_samples: r.n_samples(),
                    channels: r.channels.iter().map(|c| c.name().to_string()).collect(),
                    unmatched_labels: ing.unmatched_labels,
                    segments: r.segments,
                    trains: ing.trains,
                });
            }
            Err(reason) => {
                warn!("{file}: {reason}, excluded");
                exclusions.push(Exclusion { file, reason });
            }
        }
    }
    let mut h = Sha256::new();
    for s in &subjects {
        h.update(s.file.as_bytes());
        h.update(b"\0");
        h.update(s.sha256.as_bytes());
        h.update(b"\n");
    }
    Ok(Manifest { dataset_root: root.to_path_buf(), dataset_hash: hex(&h.finalize()), subjects, exclusions })
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
