//! IIR filter design and zero-phase application.
//!
//! Filters are stored as cascades of second-order sections in transposed
//! direct form II. Butterworth designs go through the analog prototype,
//! the usual frequency transformation and a prewarped bilinear map.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::DspError;

/// One biquad: `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = self.a[0] + self.a[1] * z1 + self.a[2] * z2;
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }
}

/// A cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    Lowpass,
    Highpass,
    Bandpass,
}

impl Sos {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(w))
    }

    /// Butterworth design of the given prototype order. For band-pass the
    /// resulting filter has `2 * order` poles.
    pub fn butterworth(order: usize, kind: BandKind, edges_hz: &[f64], fs: f64) -> Result<Sos, DspError> {
        if order == 0 {
            return Err(DspError::InvalidParameter("filter order must be >= 1".into()));
        }
        let nyq = fs / 2.0;
        let needed = if kind == BandKind::Bandpass { 2 } else { 1 };
        if edges_hz.len() != needed {
            return Err(DspError::InvalidParameter(format!(
                "{kind:?} needs {needed} edge frequencies"
            )));
        }
        for &e in edges_hz {
            if !(e > 0.0 && e < nyq) {
                return Err(DspError::InvalidParameter(format!(
                    "edge frequency {e} Hz outside (0, {nyq}) Hz"
                )));
            }
        }
        if kind == BandKind::Bandpass && edges_hz[0] >= edges_hz[1] {
            return Err(DspError::InvalidParameter("band edges must be increasing".into()));
        }

        let fs2 = 2.0 * fs;
        let warp = |f: f64| fs2 * (PI * f / fs).tan();
        let proto: Vec<Complex64> = (0..order)
            .map(|k| {
                let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
                Complex64::from_polar(1.0, theta)
            })
            .collect();

        // analog poles and the digital location of each zero
        let (poles, zeros): (Vec<Complex64>, Vec<f64>) = match kind {
            BandKind::Lowpass => {
                let wc = warp(edges_hz[0]);
                (proto.iter().map(|p| p * wc).collect(), vec![-1.0; order])
            }
            BandKind::Highpass => {
                let wc = warp(edges_hz[0]);
                (proto.iter().map(|p| wc / p).collect(), vec![1.0; order])
            }
            BandKind::Bandpass => {
                let lo = warp(edges_hz[0]);
                let hi = warp(edges_hz[1]);
                let bw = hi - lo;
                let w0sq = lo * hi;
                let mut poles = Vec::with_capacity(2 * order);
                for p in &proto {
                    let half = p * bw / 2.0;
                    let disc = (half * half - w0sq).sqrt();
                    poles.push(half + disc);
                    poles.push(half - disc);
                }
                let mut zeros = vec![1.0; order];
                zeros.extend(std::iter::repeat(-1.0).take(order));
                (poles, zeros)
            }
        };

        let digital: Vec<Complex64> = poles.iter().map(|s| (fs2 + s) / (fs2 - s)).collect();

        // normalize the passband reference to unit gain
        let ref_hz = match kind {
            BandKind::Lowpass => 0.0,
            BandKind::Highpass => nyq,
            BandKind::Bandpass => {
                // center in the warped domain, mapped back
                let lo = warp(edges_hz[0]);
                let hi = warp(edges_hz[1]);
                ((lo * hi).sqrt() / fs2).atan() * fs / PI
            }
        };
        let mut sos = Sos { sections: pair_into_sections(&digital, &zeros) };
        let g = sos.response(ref_hz, fs).norm();
        if !(g.is_finite() && g > 0.0) {
            return Err(DspError::InvalidParameter("degenerate filter design".into()));
        }
        for c in sos.sections[0].b.iter_mut() {
            *c /= g;
        }
        Ok(sos)
    }

    /// Second-order IIR notch with quality factor `q`.
    pub fn notch(freq_hz: f64, q: f64, fs: f64) -> Result<Sos, DspError> {
        if !(freq_hz > 0.0 && freq_hz < fs / 2.0) || q <= 0.0 {
            return Err(DspError::InvalidParameter(format!(
                "notch at {freq_hz} Hz with Q={q} is not realizable at fs={fs}"
            )));
        }
        let w0 = 2.0 * PI * freq_hz / fs;
        let bw = w0 / q;
        let beta = (bw / 2.0).tan();
        let gain = 1.0 / (1.0 + beta);
        let c = w0.cos();
        Ok(Sos {
            sections: vec![Biquad {
                b: [gain, -2.0 * gain * c, gain],
                a: [1.0, -2.0 * gain * c, 2.0 * gain - 1.0],
            }],
        })
    }

    /// Largest pole radius across sections.
    pub fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| {
                let (a1, a2) = (s.a[1], s.a[2]);
                let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
                let r1 = ((-a1 + disc) / 2.0).norm();
                let r2 = ((-a1 - disc) / 2.0).norm();
                r1.max(r2)
            })
            .fold(0.0, f64::max)
    }

    /// Number of samples for the impulse response envelope to decay to 1e-3.
    pub fn impulse_response_len(&self) -> usize {
        let r = self.max_pole_radius();
        let order = 2 * self.sections.len();
        if r <= 0.0 {
            return order;
        }
        if r >= 1.0 {
            return usize::MAX / 8;
        }
        ((1e-3f64).ln() / r.ln()).ceil() as usize + order
    }

    /// Steady-state section states for a unit step input.
    fn step_initial_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = s.dc_gain();
                let z2 = s.b[2] - s.a[2] * g;
                let z1 = s.b[1] - s.a[1] * g + z2;
                let state = [z1 * scale, z2 * scale];
                scale *= g;
                state
            })
            .collect()
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let mut z = [0.0f64; 2];
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b[0] * xin + z[0];
                z[0] = s.b[1] * xin - s.a[1] * out + z[1];
                z[1] = s.b[2] * xin - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Forward-backward filtering with odd reflection padding of three
    /// impulse-response lengths (capped by the signal length) and step
    /// steady-state initial conditions.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        if n == 1 {
            let mut y = vec![x[0]];
            self.run_with_zi(&mut y, x[0]);
            let first = y[0];
            self.run_with_zi(&mut y, first);
            return y;
        }
        let pad = self.impulse_response_len().saturating_mul(3).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let x0 = ext[0];
        self.run_with_zi(&mut ext, x0);
        ext.reverse();
        let y0 = ext[0];
        self.run_with_zi(&mut ext, y0);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    fn run_with_zi(&self, x: &mut [f64], x0: f64) {
        let zi = self.step_initial_state();
        for (s, z0) in self.sections.iter().zip(zi) {
            let mut z = [z0[0] * x0, z0[1] * x0];
            for v in x.iter_mut() {
                let xin = *v;
                let out = s.b[0] * xin + z[0];
                z[0] = s.b[1] * xin - s.a[1] * out + z[1];
                z[1] = s.b[2] * xin - s.a[2] * out;
                *v = out;
            }
        }
    }
}

/// Group conjugate pole pairs (and leftover real poles) into biquads,
/// attaching two digital zeros to each section.
fn pair_into_sections(poles: &[Complex64], zeros: &[f64]) -> Vec<Biquad> {
    const TOL: f64 = 1e-12;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > TOL).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= TOL).map(|p| p.re).collect();
    // poles far from the unit circle first; the order only affects rounding
    complex.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    real.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());

    let mut zero_iter = {
        // alternate zeros so band-pass sections get one of each sign
        let mut pos: Vec<f64> = zeros.iter().copied().filter(|z| *z > 0.0).collect();
        let mut neg: Vec<f64> = zeros.iter().copied().filter(|z| *z < 0.0).collect();
        let mut ordered = Vec::with_capacity(zeros.len());
        while !pos.is_empty() || !neg.is_empty() {
            if let Some(z) = pos.pop() {
                ordered.push(z);
            }
            if let Some(z) = neg.pop() {
                ordered.push(z);
            }
        }
        ordered.into_iter()
    };

    let mut sections = Vec::new();
    for p in complex {
        let a = [1.0, -2.0 * p.re, p.norm_sqr()];
        sections.push(Biquad { b: zeros_to_poly(&mut zero_iter, 2), a });
    }
    let mut real_iter = real.into_iter();
    while let Some(p1) = real_iter.next() {
        match real_iter.next() {
            Some(p2) => sections.push(Biquad {
                b: zeros_to_poly(&mut zero_iter, 2),
                a: [1.0, -(p1 + p2), p1 * p2],
            }),
            None => sections.push(Biquad {
                b: zeros_to_poly(&mut zero_iter, 1),
                a: [1.0, -p1, 0.0],
            }),
        }
    }
    sections
}

fn zeros_to_poly(zeros: &mut impl Iterator<Item = f64>, count: usize) -> [f64; 3] {
    let mut b = [1.0, 0.0, 0.0];
    for _ in 0..count {
        if let Some(z) = zeros.next() {
            // multiply by (1 - z q^-1)
            b = [b[0], b[1] - z * b[0], b[2] - z * b[1]];
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn butterworth_lowpass_half_power_at_cutoff() {
        let sos = Sos::butterworth(4, BandKind::Lowpass, &[20.0], 200.0).unwrap();
        assert_eq!(sos.sections.len(), 2);
        let g = sos.response(20.0, 200.0).norm();
        assert!((g - 0.5f64.sqrt()).abs() < 1e-9, "{g}");
        assert!((sos.response(0.0, 200.0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn butterworth_highpass_rolloff() {
        let sos = Sos::butterworth(4, BandKind::Highpass, &[1.0], 200.0).unwrap();
        assert!((sos.response(1.0, 200.0).norm() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(sos.response(0.0, 200.0).norm() < 1e-12);
        // 4th order: ~ -80 dB per decade
        assert!(db(sos.response(0.1, 200.0).norm()) < -75.0);
    }

    #[test]
    fn butterworth_bandpass_edges_and_center() {
        let sos = Sos::butterworth(4, BandKind::Bandpass, &[8.0, 13.0], 200.0).unwrap();
        assert_eq!(sos.sections.len(), 4);
        for f in [8.0, 13.0] {
            let g = sos.response(f, 200.0).norm();
            assert!((g - 0.5f64.sqrt()).abs() < 1e-6, "{f}: {g}");
        }
        assert!(sos.response(30.0, 200.0).norm() < 1e-3);
        assert!(sos.response(2.0, 200.0).norm() < 1e-3);
    }

    #[test]
    fn odd_order_lowpass_has_first_order_section() {
        let sos = Sos::butterworth(3, BandKind::Lowpass, &[10.0], 100.0).unwrap();
        assert_eq!(sos.sections.len(), 2);
        assert!((sos.response(10.0, 100.0).norm() - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rejects_edges_at_or_above_nyquist() {
        assert!(Sos::butterworth(4, BandKind::Highpass, &[100.0], 200.0).is_err());
        assert!(Sos::butterworth(4, BandKind::Bandpass, &[13.0, 8.0], 200.0).is_err());
    }

    #[test]
    fn notch_zero_at_center() {
        let sos = Sos::notch(50.0, 30.0, 200.0).unwrap();
        assert!(sos.response(50.0, 200.0).norm() < 1e-12);
        assert!(db(sos.response(40.0, 200.0).norm()).abs() < 0.1);
    }

    #[test]
    fn filtfilt_of_constant_through_lowpass_is_constant() {
        let sos = Sos::butterworth(4, BandKind::Lowpass, &[10.0], 200.0).unwrap();
        let y = sos.filtfilt(&vec![3.0; 500]);
        for v in y {
            assert!((v - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn causal_filter_impulse_decays() {
        let sos = Sos::butterworth(2, BandKind::Lowpass, &[10.0], 200.0).unwrap();
        let mut x = vec![0.0; 400];
        x[0] = 1.0;
        let y = sos.filter(&x);
        assert!(y[399].abs() < 1e-6);
        let n = sos.impulse_response_len();
        assert!(n > 10 && n < 400, "{n}");
    }
}
