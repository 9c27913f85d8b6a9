use serde::{Deserialize, Serialize};

use super::edf::EdfFile;
use super::{IngestError, Recording};

/// The 19 electrodes of the international 10-20 system, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Electrode {
    Fp1,
    Fp2,
    F7,
    F3,
    Fz,
    F4,
    F8,
    T3,
    C3,
    Cz,
    C4,
    T4,
    T5,
    P3,
    Pz,
    P4,
    T6,
    O1,
    O2,
}

impl Electrode {
    pub const ALL: [Electrode; 19] = [
        Electrode::Fp1,
        Electrode::Fp2,
        Electrode::F7,
        Electrode::F3,
        Electrode::Fz,
        Electrode::F4,
        Electrode::F8,
        Electrode::T3,
        Electrode::C3,
        Electrode::Cz,
        Electrode::C4,
        Electrode::T4,
        Electrode::T5,
        Electrode::P3,
        Electrode::Pz,
        Electrode::P4,
        Electrode::T6,
        Electrode::O1,
        Electrode::O2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Electrode::Fp1 => "Fp1",
            Electrode::Fp2 => "Fp2",
            Electrode::F7 => "F7",
            Electrode::F3 => "F3",
            Electrode::Fz => "Fz",
            Electrode::F4 => "F4",
            Electrode::F8 => "F8",
            Electrode::T3 => "T3",
            Electrode::C3 => "C3",
            Electrode::Cz => "Cz",
            Electrode::C4 => "C4",
            Electrode::T4 => "T4",
            Electrode::T5 => "T5",
            Electrode::P3 => "P3",
            Electrode::Pz => "Pz",
            Electrode::P4 => "P4",
            Electrode::T6 => "T6",
            Electrode::O1 => "O1",
            Electrode::O2 => "O2",
        }
    }

    /// Exact (case-insensitive) name lookup, including the modern aliases
    /// T7/T8/P7/P8.
    pub fn from_name(name: &str) -> Option<Electrode> {
        let upper = name.to_ascii_uppercase();
        let canonical = match upper.as_str() {
            "T7" => "T3",
            "T8" => "T4",
            "P7" => "T5",
            "P8" => "T6",
            other => other,
        };
        Electrode::ALL
            .iter()
            .copied()
            .find(|e| e.name().eq_ignore_ascii_case(canonical))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Electrode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Map a raw EDF label like `"EEG FP1-REF"` or `"T7-LE"` to an electrode.
pub fn normalize_label(label: &str) -> Option<Electrode> {
    let mut s = label.trim();
    for prefix in ["EEG ", "EEG-", "EEG_"] {
        if s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
            s = s[prefix.len()..].trim();
        }
    }
    // keep the active electrode of "X-REF" / "X-LE" / "X-AVG" / "X-A1" forms
    let head = s.split(['-', ' ', '_']).next().unwrap_or("");
    Electrode::from_name(head)
}

/// Trigger channel kept outside the EEG matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoticChannel {
    pub label: String,
    pub fs: f64,
    pub signal: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ChannelSelection {
    pub recording: Recording,
    pub photic: Option<PhoticChannel>,
    pub unmatched_labels: Vec<String>,
}

fn microvolt_scale(unit: &str) -> Option<f64> {
    let u = unit.trim();
    match u {
        "uV" | "UV" | "uv" | "\u{b5}V" | "\u{3bc}V" | "microvolt" | "microvolts" => Some(1.0),
        "mV" | "MV" | "mv" | "millivolt" | "millivolts" => Some(1000.0),
        _ => None,
    }
}

pub(crate) fn is_photic_label(label: &str) -> bool {
    label.to_ascii_lowercase().contains("photic")
}

/// Keep 10-20 EEG channels (canonical order, microvolts) and set aside the
/// photic trigger channel. The first occurrence wins when an electrode appears
/// twice.
pub fn select_channels(file: &EdfFile) -> Result<ChannelSelection, IngestError> {
    let header = &file.header;
    let mut picked: Vec<Option<usize>> = vec![None; Electrode::ALL.len()];
    let mut photic = None;
    let mut unmatched = Vec::new();
    for (i, sig) in header.signals.iter().enumerate() {
        if is_photic_label(&sig.label) {
            if photic.is_none() {
                photic = Some(PhoticChannel {
                    label: sig.label.clone(),
                    fs: sig.sample_rate(header.record_duration_s),
                    signal: file.signals[i].clone(),
                });
            }
            continue;
        }
        match normalize_label(&sig.label) {
            Some(e) if picked[e.index()].is_none() => picked[e.index()] = Some(i),
            _ => unmatched.push(sig.label.clone()),
        }
    }

    let matched: Vec<(Electrode, usize)> = Electrode::ALL
        .iter()
        .zip(&picked)
        .filter_map(|(&e, p)| p.map(|i| (e, i)))
        .collect();
    if matched.len() < 2 {
        return Err(IngestError::InsufficientCoverage { matched: matched.len() });
    }

    let mut rates: Vec<f64> = matched
        .iter()
        .map(|&(_, i)| header.signals[i].sample_rate(header.record_duration_s))
        .collect();
    rates.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if rates.len() != 1 {
        return Err(IngestError::MixedRates(rates));
    }

    let mut data = Vec::with_capacity(matched.len());
    for &(_, i) in &matched {
        let sig = &header.signals[i];
        let scale = microvolt_scale(&sig.physical_dimension).ok_or_else(|| IngestError::UnknownUnit {
            label: sig.label.clone(),
            unit: sig.physical_dimension.clone(),
        })?;
        data.push(file.signals[i].iter().map(|v| v * scale).collect());
    }

    Ok(ChannelSelection {
        recording: Recording {
            subject_id: header.patient_id.clone(),
            channels: matched.iter().map(|&(e, _)| e).collect(),
            fs: rates[0],
            data,
            segments: Vec::new(),
            label: None,
            ied_free: false,
        },
        photic,
        unmatched_labels: unmatched,
    })
}

#[cfg(test)]
mod tests {
    use super::super::edf::{parse_edf, write_edf, EdfSignalSpec, StartDateTime};
    use super::*;

    fn file_with(labels: &[(&str, &str)], value: f64) -> EdfFile {
        let samples = vec![value; 200];
        let specs: Vec<EdfSignalSpec> = labels
            .iter()
            .map(|(l, u)| EdfSignalSpec { label: l, physical_dimension: u, samples_per_record: 100, samples: &samples })
            .collect();
        parse_edf(&write_edf("p", "r", StartDateTime::default(), 1.0, &specs).unwrap()).unwrap()
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label("EEG FP1-REF"), Some(Electrode::Fp1));
        assert_eq!(normalize_label("eeg t7-le"), Some(Electrode::T3));
        assert_eq!(normalize_label("P8"), Some(Electrode::T6));
        assert_eq!(normalize_label("CZ"), Some(Electrode::Cz));
        assert_eq!(normalize_label("ECG"), None);
        assert_eq!(normalize_label("EEG T1-REF"), None);
        assert_eq!(normalize_label("Photic PH"), None);
    }

    #[test]
    fn selection_keeps_1020_and_sets_photic_aside() {
        let f = file_with(&[("EEG FP1-REF", "uV"), ("Photic PH", "uV"), ("ECG", "uV"), ("EEG O2-REF", "uV")], 1.0);
        let sel = select_channels(&f).unwrap();
        assert_eq!(sel.recording.channels, vec![Electrode::Fp1, Electrode::O2]);
        assert_eq!(sel.photic.as_ref().unwrap().label, "Photic PH");
        assert_eq!(sel.unmatched_labels, vec!["ECG".to_string()]);
    }

    #[test]
    fn single_match_is_insufficient() {
        let f = file_with(&[("EEG FP1-REF", "uV"), ("Photic PH", "uV"), ("ECG", "uV")], 1.0);
        assert!(matches!(select_channels(&f), Err(IngestError::InsufficientCoverage { matched: 1 })));
    }

    #[test]
    fn millivolts_are_scaled() {
        let f = file_with(&[("C3", "mV"), ("C4", "mV")], 0.05);
        let sel = select_channels(&f).unwrap();
        // one digital step of the [-1, 2] mV range written for a constant signal
        let step_uv = 3.0 / 65535.0 * 1000.0;
        for v in &sel.recording.data[0] {
            assert!((v - 50.0).abs() <= step_uv, "{v}");
        }
    }

    #[test]
    fn unknown_unit_rejected() {
        let f = file_with(&[("C3", "V?"), ("C4", "uV")], 1.0);
        assert!(matches!(select_channels(&f), Err(IngestError::UnknownUnit { .. })));
    }

    #[test]
    fn canonical_order_regardless_of_input_order() {
        let mut labels: Vec<String> = Electrode::ALL.iter().rev().map(|e| format!("EEG {}-REF", e.name().to_uppercase())).collect();
        labels.push("EKG".into());
        labels.push("EEG A1-REF".into());
        let pairs: Vec<(&str, &str)> = labels.iter().map(|l| (l.as_str(), "uV")).collect();
        let sel = select_channels(&file_with(&pairs, 2.0)).unwrap();
        assert_eq!(sel.recording.channels, Electrode::ALL.to_vec());
        assert_eq!(sel.recording.data.len(), 19);
    }
}
