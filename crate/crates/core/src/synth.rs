//! Labeled synthetic cohorts with controllable photic driving, HV slowing
//! and inter-channel coupling.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::{fft_real, ifft_in_place};
use crate::ingest::{locate_segments, write_edf, Electrode, Label, PhoticTrain, Recording, Sidecar, StartDateTime};
use crate::seed::derive_seed;

/// Flash frequencies of the stimulation sweep.
pub const SWEEP_HZ: [f64; 11] = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0, 21.0];
const LEAD_S: f64 = 5.0;
const PULSE_S: f64 = 0.01;
const TRIGGER_LEVEL: f64 = 100.0;
const PHOTIC_LABEL: &str = "Photic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n_per_class: usize,
    /// sampling rate, a whole number of Hz
    pub fs: f64,
    pub resting_s: f64,
    pub train_s: f64,
    pub inter_train_s: f64,
    pub hv_s: f64,
    /// flash-frequency amplitude in units of the subject's alpha amplitude
    pub photic_driving_gain: f64,
    /// theta/delta amplitude at full HV effect, in alpha units
    pub hv_slowing_gain: f64,
    /// relative alpha increase during HV for subjects without slowing
    pub nonresponder_alpha_gain: f64,
    /// shared alpha-band source, in alpha units
    pub plv_coupling_gain: f64,
    pub background_uv: f64,
    pub white_noise_uv: f64,
    pub alpha_uv: f64,
    /// log-normal spread of per-subject amplitudes
    pub subject_spread: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_per_class: 10,
            fs: 200.0,
            resting_s: 60.0,
            train_s: 10.0,
            inter_train_s: 3.0,
            hv_s: 120.0,
            photic_driving_gain: 0.0,
            hv_slowing_gain: 0.0,
            nonresponder_alpha_gain: 0.3,
            plv_coupling_gain: 0.0,
            background_uv: 10.0,
            white_noise_uv: 1.0,
            alpha_uv: 15.0,
            subject_spread: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("invalid synth spec: {0}")]
pub struct SynthError(pub String);

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError(m.to_string()));
        if self.n_per_class == 0 {
            return bad("n_per_class must be >= 1");
        }
        if !(self.fs >= 50.0 && self.fs.fract() == 0.0) {
            return bad("fs must be a whole number >= 50 Hz");
        }
        let gains = [self.photic_driving_gain, self.hv_slowing_gain, self.nonresponder_alpha_gain, self.plv_coupling_gain];
        if gains.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return bad("gains must be finite and >= 0");
        }
        let spans = [self.resting_s, self.train_s, self.hv_s];
        if spans.iter().any(|s| !(*s >= 1.0)) || self.inter_train_s < 0.0 {
            return bad("segment durations must be at least 1 s");
        }
        if [self.background_uv, self.white_noise_uv, self.alpha_uv, self.subject_spread].iter().any(|v| !(*v >= 0.0)) {
            return bad("amplitudes must be >= 0");
        }
        Ok(())
    }

    /// Onset (s) of each flash train.
    fn train_onsets(&self) -> Vec<f64> {
        let ips_start = LEAD_S + self.resting_s + LEAD_S;
        (0..SWEEP_HZ.len()).map(|i| ips_start + i as f64 * (self.train_s + self.inter_train_s)).collect()
    }

    fn hv_span_s(&self) -> (f64, f64) {
        let last = self.train_onsets().last().copied().unwrap_or(0.0) + self.train_s;
        let start = (last + LEAD_S).ceil();
        (start, start + self.hv_s)
    }

    pub fn duration_s(&self) -> f64 {
        (self.hv_span_s().1 + LEAD_S).ceil()
    }
}

/// What the generator put into one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub label: Label,
    pub hv_responder: bool,
    pub trains: Vec<PhoticTrain>,
    pub hv_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSubject {
    pub recording: Recording,
    /// photic trigger at the EEG rate
    pub trigger: Vec<f64>,
    pub sidecar: Sidecar,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub spec: SynthSpec,
    pub subjects: Vec<SynthSubject>,
}

impl Cohort {
    pub fn recordings(&self) -> Vec<Recording> {
        self.subjects.iter().map(|s| s.recording.clone()).collect()
    }
}

/// Pink (1/f power) noise above 0.5 Hz scaled to the given RMS.
fn pink_noise(rng: &mut ChaCha8Rng, n: usize, fs: f64, rms: f64) -> Vec<f64> {
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let nfft = n.next_power_of_two();
    let mut spec = fft_real(&white, nfft);
    for (k, c) in spec.iter_mut().enumerate() {
        let kk = k.min(nfft - k);
        let f = kk as f64 * fs / nfft as f64;
        *c *= if f < 0.5 { 0.0 } else { 1.0 / f.sqrt() };
    }
    ifft_in_place(&mut spec);
    let x: Vec<f64> = spec[..n].iter().map(|c: &Complex64| c.re).collect();
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let g = if cur > 0.0 { rms / cur } else { 0.0 };
    x.into_iter().map(|v| v * g).collect()
}

/// Sum of eight random-phase sinusoids in `[lo, hi]` Hz with the power of a
/// unit-amplitude sine.
struct Narrowband {
    comps: Vec<(f64, f64)>,
}

impl Narrowband {
    fn new(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Narrowband {
        Narrowband { comps: (0..8).map(|_| (rng.gen_range(lo..=hi), rng.gen_range(0.0..2.0 * PI))).collect() }
    }

    fn at(&self, t: f64) -> f64 {
        let s: f64 = self.comps.iter().map(|&(f, ph)| (2.0 * PI * f * t + ph).sin()).sum();
        s / (self.comps.len() as f64).sqrt()
    }
}

fn alpha_weight(e: Electrode) -> f64 {
    use Electrode::*;
    match e {
        O1 | O2 => 1.0,
        P3 | P4 | Pz | T5 | T6 => 0.5,
        _ => 0.15,
    }
}

fn driving_weight(e: Electrode) -> f64 {
    use Electrode::*;
    match e {
        O1 | O2 => 1.0,
        P3 | P4 | Pz | T5 | T6 => 0.5,
        _ => 0.0,
    }
}

/// One subject. Even indices are epileptic; HV slowing is injected into the
/// epileptic subjects and the others get an alpha increase instead.
pub fn gen_subject(spec: &SynthSpec, index: usize) -> SynthSubject {
    let label = if index % 2 == 0 { Label::Epileptic } else { Label::NonEpileptic };
    let epileptic = label == Label::Epileptic;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, index as u64]));
    let fs = spec.fs;
    let n = (spec.duration_s() * fs).round() as usize;
    let spread = Normal::new(0.0, spec.subject_spread.max(1e-12)).expect("finite spread");
    let bg = spec.background_uv * f64::exp(spread.sample(&mut rng));
    let alpha = spec.alpha_uv * f64::exp(spread.sample(&mut rng));
    let alpha_f = 10.0 + rng.gen_range(-1.0..1.0);

    let onsets = spec.train_onsets();
    let width = ((PULSE_S * fs).round() as usize).max(1);
    let mut trigger = vec![0.0; n];
    let mut trains = Vec::new();
    for (&t0, &f) in onsets.iter().zip(&SWEEP_HZ) {
        let n_pulses = (spec.train_s * f).round().max(1.0) as usize;
        let mut first = usize::MAX;
        let mut last = 0;
        for p in 0..n_pulses {
            let at = ((t0 + p as f64 / f) * fs).round() as usize;
            first = first.min(at);
            last = at + width;
            for v in trigger.iter_mut().skip(at).take(width) {
                *v = TRIGGER_LEVEL;
            }
        }
        trains.push(PhoticTrain { start_sample: first, end_sample: last.min(n), flash_frequency_hz: f });
    }
    let (hv_a, hv_b) = spec.hv_span_s();
    let hv_span = ((hv_a * fs).round() as usize, ((hv_b * fs).round() as usize).min(n));

    let hv_ramp = |t: f64| {
        if t < hv_a || t >= hv_b {
            return 0.0;
        }
        let u = (t - hv_a) / (hv_b - hv_a);
        ((u - 0.25) / 0.25).clamp(0.0, 1.0)
    };
    let driving_at = |t: f64| -> Option<f64> {
        onsets.iter().zip(&SWEEP_HZ).find(|(&t0, _)| t >= t0 && t < t0 + spec.train_s).map(|(_, &f)| f)
    };
    let shared = Narrowband::new(&mut rng, alpha_f - 1.0, alpha_f + 1.0);
    let responder = epileptic && spec.hv_slowing_gain > 0.0;
    let white = Normal::new(0.0, spec.white_noise_uv.max(1e-12)).expect("finite noise");

    let channel_seeds: Vec<u64> = (0..Electrode::ALL.len()).map(|_| rng.gen()).collect();
    let data: Vec<Vec<f64>> = Electrode::ALL
        .par_iter()
        .zip(&channel_seeds)
        .enumerate()
        .map(|(c, (&e, &cs))| {
            let mut rng = ChaCha8Rng::seed_from_u64(cs);
            let mut x = pink_noise(&mut rng, n, fs, bg);
            let a_band = Narrowband::new(&mut rng, alpha_f - 0.5, alpha_f + 0.5);
            let theta = Narrowband::new(&mut rng, 4.5, 7.5);
            let delta = Narrowband::new(&mut rng, 1.5, 3.5);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let a_amp = alpha * alpha_weight(e);
            let d_amp = spec.photic_driving_gain * alpha * driving_weight(e);
            let couple = spec.plv_coupling_gain * alpha * (0.5 + 0.5 * c as f64 / (Electrode::ALL.len() - 1) as f64);
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / fs;
                let r = hv_ramp(t);
                let a_gain = if !epileptic && spec.hv_slowing_gain > 0.0 { 1.0 + spec.nonresponder_alpha_gain * r } else { 1.0 };
                *v += a_amp * a_gain * a_band.at(t) + white.sample(&mut rng);
                if epileptic && d_amp > 0.0 {
                    if let Some(f) = driving_at(t) {
                        *v += d_amp * (2.0 * PI * f * t + phase).sin();
                    }
                }
                if responder && r > 0.0 {
                    *v += spec.hv_slowing_gain * alpha * r * (theta.at(t) + delta.at(t));
                }
                if epileptic && couple > 0.0 {
                    *v += couple * shared.at(t);
                }
            }
            x
        })
        .collect();

    let subject_id = format!("S{index:03}");
    let recording = Recording {
        subject_id: subject_id.clone(),
        channels: Electrode::ALL.to_vec(),
        fs,
        data,
        segments: Vec::new(),
        label: Some(label),
        ied_free: true,
    };
    let recording = locate_segments(recording, &trains, Some(hv_span)).expect("generator layout is consistent");
    let sidecar = Sidecar {
        subject_id,
        label: Some(label),
        ied_free: true,
        hv_start_s: Some(hv_a),
        hv_end_s: Some(hv_b),
    };
    SynthSubject { recording, trigger, sidecar, truth: GroundTruth { label, hv_responder: responder, trains, hv_span } }
}

/// `2 * n_per_class` subjects, alternating epileptic / non-epileptic.
pub fn gen_cohort(spec: &SynthSpec) -> Result<Cohort, SynthError> {
    spec.validate()?;
    let subjects = (0..2 * spec.n_per_class).map(|i| gen_subject(spec, i)).collect();
    Ok(Cohort { spec: spec.clone(), subjects })
}

impl SynthSubject {
    /// EDF bytes: 19 EEG channels (`EEG <name>-REF`, uV) plus the trigger.
    pub fn to_edf(&self) -> Vec<u8> {
        let rec = &self.recording;
        let spr = rec.fs.round() as usize;
        let labels: Vec<String> = rec.channels.iter().map(|e| format!("EEG {}-REF", e.name())).collect();
        let mut specs: Vec<crate::ingest::EdfSignalSpec<'_>> = rec
            .data
            .iter()
            .zip(&labels)
            .map(|(x, l)| crate::ingest::EdfSignalSpec { label: l, physical_dimension: "uV", samples_per_record: spr, samples: x })
            .collect();
        specs.push(crate::ingest::EdfSignalSpec {
            label: PHOTIC_LABEL,
            physical_dimension: "uV",
            samples_per_record: spr,
            samples: &self.trigger,
        });
        write_edf(&rec.subject_id, "synthetic", StartDateTime::default(), 1.0, &specs).expect("whole-second recording")
    }
}

/// Write `<id>.edf` and `<id>.toml` for every subject.
pub fn write_cohort(cohort: &Cohort, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for s in &cohort.subjects {
        let edf = dir.join(format!("{}.edf", s.recording.subject_id));
        std::fs::write(&edf, s.to_edf())?;
        std::fs::write(dir.join(format!("{}.toml", s.recording.subject_id)), s.sidecar.to_toml())?;
        out.push(edf);
    }
    Ok(out)
}
