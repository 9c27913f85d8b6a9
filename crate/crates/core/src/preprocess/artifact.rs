use serde::{Deserialize, Serialize};

use crate::dsp::stats;

use super::PreprocessError;

/// Noise-based rejection rule: a window is rejected when any channel's RMS
/// exceeds `median + mad_multiplier * MAD` of that channel's window RMS
/// values, or the absolute ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmsRule {
    pub mad_multiplier: f64,
    pub absolute_ceiling_uv: Option<f64>,
}

impl Default for RmsRule {
    fn default() -> Self {
        RmsRule { mad_multiplier: 6.0, absolute_ceiling_uv: Some(500.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub window_len: usize,
    /// `true` marks a rejected window.
    pub mask: Vec<bool>,
    pub kept: Vec<usize>,
    /// window x channel RMS
    pub rms: Vec<Vec<f64>>,
}

impl Rejection {
    pub fn rejected_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Sample spans of rejected windows.
    pub fn rejected_spans(&self) -> Vec<(usize, usize)> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(w, _)| (w * self.window_len, (w + 1) * self.window_len))
            .collect()
    }
}

/// Split into consecutive windows of `window_s` seconds and flag windows
/// where any channel's RMS breaks the rule. A trailing partial window is
/// judged on its own samples.
pub fn rms_artifact_reject(
    data: &[Vec<f64>],
    fs: f64,
    window_s: f64,
    rule: &RmsRule,
) -> Result<Rejection, PreprocessError> {
    let window_len = (window_s * fs).round() as usize;
    let n = data.first().map_or(0, Vec::len);
    if window_len == 0 || n < window_len {
        return Err(PreprocessError::SegmentTooShort { needed: window_len, available: n });
    }
    let n_windows = n.div_ceil(window_len);
    let rms: Vec<Vec<f64>> = (0..n_windows)
        .map(|w| {
            let (a, b) = (w * window_len, ((w + 1) * window_len).min(n));
            data.iter().map(|ch| stats::rms(&ch[a..b])).collect()
        })
        .collect();

    let n_ch = data.len();
    let thresholds: Vec<f64> = (0..n_ch)
        .map(|c| {
            let col: Vec<f64> = rms.iter().map(|r| r[c]).collect();
            let med = stats::median(&col);
            let thr = med + rule.mad_multiplier * stats::mad(&col);
            // rounding slack so exactly repeated RMS values never trip the rule
            thr * (1.0 + 1e-9)
        })
        .collect();

    let mask: Vec<bool> = rms
        .iter()
        .map(|r| {
            r.iter().zip(&thresholds).any(|(&v, &t)| {
                v > t || rule.absolute_ceiling_uv.is_some_and(|ceil| v > ceil)
            })
        })
        .collect();
    let kept = mask.iter().enumerate().filter(|(_, m)| !**m).map(|(i, _)| i).collect();
    Ok(Rejection { window_len, mask, kept, rms })
}
