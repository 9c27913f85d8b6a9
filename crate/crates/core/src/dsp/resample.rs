//! Polyphase rational-ratio resampling with a Kaiser-windowed sinc
//! anti-aliasing filter.

use std::f64::consts::PI;

use super::DspError;

/// Stop-band attenuation targeted by the Kaiser design, in dB.
const STOPBAND_DB: f64 = 60.0;

/// Reduced up/down factors for an integer rate change.
pub fn rational_ratio(fs_in: f64, fs_out: f64) -> Result<(usize, usize), DspError> {
    let to_int = |f: f64| -> Result<u64, DspError> {
        let r = f.round();
        if f <= 0.0 || (f - r).abs() > 1e-9 {
            return Err(DspError::InvalidParameter(format!(
                "sampling rate {f} Hz is not a positive integer"
            )));
        }
        Ok(r as u64)
    };
    let (a, b) = (to_int(fs_in)?, to_int(fs_out)?);
    let g = gcd(a, b);
    Ok(((b / g) as usize, (a / g) as usize))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Low-pass prototype at the up-sampled rate. Pass edge at 0.8 and stop edge
/// at 1.0 of the output Nyquist, cutoff in between (0.9).
fn design_filter(up: usize, down: usize) -> Vec<f64> {
    // normalized to the up-sampled rate (cycles/sample); down >= up here
    let nyq_out = 0.5 / down as f64;
    let cutoff = 0.9 * nyq_out;
    let transition = 0.2 * nyq_out;
    let beta = 0.1102 * (STOPBAND_DB - 8.7);
    let mut taps = ((STOPBAND_DB - 8.0) / (2.285 * 2.0 * PI * transition)).ceil() as usize + 1;
    if taps % 2 == 0 {
        taps += 1;
    }
    let mid = (taps - 1) as f64 / 2.0;
    let i0_beta = bessel_i0(beta);
    (0..taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = t / mid;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            sinc * w * up as f64
        })
        .collect()
}

/// Resample `x` from `fs_in` to `fs_out` (both integer-valued, `fs_out <= fs_in`).
/// Output length is `ceil(len * up / down)`.
pub fn resample(x: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>, DspError> {
    if fs_out > fs_in {
        return Err(DspError::InvalidParameter(format!(
            "target rate {fs_out} Hz exceeds source rate {fs_in} Hz"
        )));
    }
    let (up, down) = rational_ratio(fs_in, fs_out)?;
    if up == down {
        return Ok(x.to_vec());
    }
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let h = design_filter(up, down);
    let delay = (h.len() - 1) / 2;

    // odd reflection padding by a multiple of `down` input samples keeps the
    // output grid aligned
    let reach = h.len() / up + 2;
    let pad_in = (reach.div_ceil(down) * down).min(if n > 1 { n - 1 } else { 0 });
    let pad_in = pad_in - pad_in % down;
    let mut ext = Vec::with_capacity(n + 2 * pad_in);
    for i in (1..=pad_in).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad_in {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }

    let out_len = (n * up).div_ceil(down);
    let offset = pad_in * up / down;
    let ext_up_len = (ext.len() * up) as isize;
    let mut y = Vec::with_capacity(out_len);
    for m in 0..out_len {
        // position in the up-sampled extended stream, including filter delay
        let pos = ((m + offset) * down + delay) as isize;
        // taps k with (pos - k) divisible by up index real input samples
        let first_k = (pos.rem_euclid(up as isize)) as usize;
        let mut acc = 0.0;
        let mut k = first_k;
        while k < h.len() {
            let idx = pos - k as isize;
            if idx < 0 {
                break;
            }
            if idx < ext_up_len {
                acc += h[k] * ext[idx as usize / up];
            }
            k += up;
        }
        y.push(acc);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_reduction() {
        assert_eq!(rational_ratio(500.0, 250.0).unwrap(), (1, 2));
        assert_eq!(rational_ratio(256.0, 250.0).unwrap(), (125, 128));
        assert!(rational_ratio(250.5, 200.0).is_err());
    }

    #[test]
    fn identity_when_rates_match() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(resample(&x, 200.0, 200.0).unwrap(), x);
    }

    #[test]
    fn upsampling_is_rejected() {
        assert!(resample(&[0.0; 10], 200.0, 250.0).is_err());
    }

    #[test]
    fn output_length() {
        let y = resample(&vec![0.0; 1001], 500.0, 200.0).unwrap();
        assert_eq!(y.len(), 401);
    }

    #[test]
    fn constant_is_preserved() {
        let y = resample(&vec![5.0; 2000], 256.0, 200.0).unwrap();
        for v in &y {
            assert!((v - 5.0).abs() < 5e-3, "{v}");
        }
    }
}
