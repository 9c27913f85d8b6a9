//! Relative band power from a Welch periodogram.

use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::welch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::Delta, Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }
}

/// Half-open band edges in Hz; the gamma upper edge depends on the rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBands {
    pub edges: [(f64, f64); 5],
}

impl FrequencyBands {
    pub fn for_fs(fs: f64) -> Self {
        let gamma_hi = 45f64.min(0.9 * fs / 2.0);
        FrequencyBands { edges: [(1.0, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0), (30.0, gamma_hi)] }
    }

    pub fn get(&self, band: Band) -> (f64, f64) {
        self.edges[band as usize]
    }

    pub fn lowest(&self) -> f64 {
        self.edges[0].0
    }

    pub fn highest(&self) -> f64 {
        self.edges[4].1
    }
}

/// Per channel, the five relative powers. Returns `true` in the flag when
/// some channel had no power and was given the uniform split.
pub fn extract_spectral(window: &[Vec<f64>], fs: f64, bands: &FrequencyBands) -> (Vec<f64>, bool) {
    let nperseg = fs.round() as usize;
    let mut flagged = false;
    let mut out = Vec::with_capacity(window.len() * 5);
    for ch in window {
        let psd = welch(ch, fs, nperseg);
        let powers: Vec<f64> = bands.edges.iter().map(|&(lo, hi)| psd.band_power(lo, hi)).collect();
        let total: f64 = powers.iter().sum();
        if total > 0.0 && total.is_finite() {
            out.extend(powers.iter().map(|p| p / total));
        } else {
            flagged = true;
            out.extend([0.2; 5]);
        }
    }
    (out, flagged)
}
