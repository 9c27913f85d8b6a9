//! Per-recording metadata file (TOML key-value), e.g.
//!
//! ```toml
//! subject_id = "S017"
//! label = "epileptic"
//! ied_free = true
//! hv_start_s = 420.0
//! hv_end_s = 600.0
//! ```

use serde::{Deserialize, Serialize};

use super::{IngestError, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub subject_id: String,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub ied_free: bool,
    #[serde(default)]
    pub hv_start_s: Option<f64>,
    #[serde(default)]
    pub hv_end_s: Option<f64>,
}

impl Sidecar {
    pub fn parse(text: &str) -> Result<Sidecar, IngestError> {
        let s: Sidecar = toml::from_str(text).map_err(|e| IngestError::Sidecar(e.message().to_string()))?;
        match (s.hv_start_s, s.hv_end_s) {
            (Some(a), Some(b)) if !(b > a && a >= 0.0) => {
                Err(IngestError::Sidecar(format!("hv span [{a}, {b}] is empty or negative")))
            }
            (Some(_), None) | (None, Some(_)) => {
                Err(IngestError::Sidecar("hv_start_s and hv_end_s must be given together".into()))
            }
            _ => Ok(s),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sidecar fields are always representable")
    }

    /// HV span in samples, clipped to the recording length.
    pub fn hv_span_samples(&self, fs: f64, n_samples: usize) -> Option<(usize, usize)> {
        let (a, b) = (self.hv_start_s?, self.hv_end_s?);
        let start = ((a * fs).round() as usize).min(n_samples);
        let end = ((b * fs).round() as usize).min(n_samples);
        (end > start).then_some((start, end))
    }
}
