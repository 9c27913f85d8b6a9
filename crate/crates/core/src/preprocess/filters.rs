use crate::dsp::filter::{BandKind, Sos};

use super::PreprocessError;

/// Quality factor of the line-noise notch.
pub const NOTCH_Q: f64 = 30.0;

/// Zero-phase second-order notch at `notch_hz`.
pub fn notch_filter(signal: &[f64], fs: f64, notch_hz: f64) -> Result<Vec<f64>, PreprocessError> {
    if !(fs > 2.0 * notch_hz) || notch_hz <= 0.0 {
        return Err(PreprocessError::InvalidConfig(format!(
            "notch at {notch_hz} Hz needs fs > {} Hz, got {fs}",
            2.0 * notch_hz
        )));
    }
    let sos = Sos::notch(notch_hz, NOTCH_Q, fs)?;
    Ok(sos.filtfilt(signal))
}

/// Butterworth high-pass of the given order run forward and backward.
pub fn highpass_zero_phase(signal: &[f64], fs: f64, cutoff: f64, order: usize) -> Result<Vec<f64>, PreprocessError> {
    if !(cutoff > 0.0 && cutoff < fs / 2.0) {
        return Err(PreprocessError::InvalidConfig(format!(
            "high-pass cutoff {cutoff} Hz must lie in (0, {}) Hz",
            fs / 2.0
        )));
    }
    let sos = Sos::butterworth(order, BandKind::Highpass, &[cutoff], fs)?;
    Ok(sos.filtfilt(signal))
}

/// Zero-phase Butterworth band-pass (prototype order `order`).
pub fn bandpass_zero_phase(signal: &[f64], fs: f64, lo: f64, hi: f64, order: usize) -> Result<Vec<f64>, PreprocessError> {
    let sos = Sos::butterworth(order, BandKind::Bandpass, &[lo, hi], fs)?;
    Ok(sos.filtfilt(signal))
}
