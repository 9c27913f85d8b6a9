mod common;

use std::f64::consts::PI;

use common::oracles::xcorr_peak_lag;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stimeeg::features::{extract_window, Family};
use stimeeg::hvresponse::subject_slowing;
use stimeeg::ingest::{detect_ips_trains, parse_edf, write_edf, EdfSignalSpec, SignalHeader, StartDateTime};
use stimeeg::preprocess::{bandpass_zero_phase, rms_artifact_reject, RmsRule};
use stimeeg::stacking::{fit_stack, StackInputs};
use stimeeg::synth::{gen_subject, SynthSpec};

fn gaussian_window(seed: u64, channels: usize, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..channels)
        .map(|c| {
            let f = 4.0 + 3.0 * c as f64;
            (0..n)
                .map(|i| (2.0 * PI * f * i as f64 / 200.0).sin() + rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect()
}

fn scaled(w: &[Vec<f64>], c: f64) -> Vec<Vec<f64>> {
    w.iter().map(|r| r.iter().map(|v| v * c).collect()).collect()
}

fn pulse_train(len: usize, fs: f64, at: usize, dur_s: f64, freq: f64) -> Vec<f64> {
    let mut sig = vec![0.0; len];
    let width = (0.01 * fs).round() as usize;
    for p in 0..(dur_s * freq).round() as usize {
        let s = at + (p as f64 / freq * fs).round() as usize;
        for v in sig.iter_mut().skip(s).take(width) {
            *v = 100.0;
        }
    }
    sig
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn edf_roundtrip_within_one_step(seed in any::<u64>(), amp in 1.0f64..5000.0, spr in 1usize..64, records in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..spr * records).map(|_| rng.gen_range(-amp..amp)).collect();
        let b: Vec<f64> = (0..2 * spr * records).map(|_| rng.gen_range(0.0..amp)).collect();
        let specs = [
            EdfSignalSpec { label: "EEG C3-REF", physical_dimension: "uV", samples_per_record: spr, samples: &a },
            EdfSignalSpec { label: "EEG C4-REF", physical_dimension: "uV", samples_per_record: 2 * spr, samples: &b },
        ];
        let bytes = write_edf("p", "r", StartDateTime::default(), 1.0, &specs).unwrap();
        let edf = parse_edf(&bytes).unwrap();
        for (sig, (orig, h)) in edf.signals.iter().zip([&a, &b].into_iter().zip(&edf.header.signals)) {
            let step = (h.physical_max - h.physical_min) / (h.digital_max - h.digital_min) as f64;
            prop_assert_eq!(sig.len(), orig.len());
            for (x, y) in sig.iter().zip(orig.iter()) {
                prop_assert!((x - y).abs() <= step * (1.0 + 1e-9), "{} {} step {}", x, y, step);
            }
        }
    }

    #[test]
    fn calibration_is_affine_and_monotone(pmin in -1e4f64..0.0, span in 1.0f64..2e4, dmin in -32768i32..0, dspan in 1i32..32767) {
        let h = SignalHeader {
            label: "x".into(),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: pmin,
            physical_max: pmin + span,
            digital_min: dmin,
            digital_max: dmin + dspan,
            prefiltering: String::new(),
            samples_per_record: 1,
        };
        let tol = 1e-9 * (pmin.abs() + span);
        prop_assert!((h.calibrate(h.digital_min) - h.physical_min).abs() <= tol);
        prop_assert!((h.calibrate(h.digital_max) - h.physical_max).abs() <= tol);
        if dspan % 2 == 0 {
            let mid = h.calibrate(dmin + dspan / 2);
            prop_assert!((mid - (h.physical_min + h.physical_max) / 2.0).abs() <= tol);
        }
        let mut prev = f64::NEG_INFINITY;
        for d in (dmin..=dmin + dspan).step_by((dspan as usize / 50).max(1)) {
            let v = h.calibrate(d);
            prop_assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn trigger_detection_is_translation_equivariant(freq_step in 0usize..11, dur in 4.0f64..12.0, at in 400usize..2000, shift in 0usize..600) {
        let fs = 200.0;
        let freq = 1.0 + 2.0 * freq_step as f64;
        let len = at + (dur * fs) as usize + 2000;
        let a = detect_ips_trains(&pulse_train(len, fs, at, dur, freq), fs).unwrap();
        let b = detect_ips_trains(&pulse_train(len + shift, fs, at + shift, dur, freq), fs).unwrap();
        prop_assert_eq!(a.len(), 1);
        prop_assert_eq!(b.len(), 1);
        prop_assert_eq!(b[0].start_sample, a[0].start_sample + shift);
        prop_assert_eq!(b[0].end_sample, a[0].end_sample + shift);
        prop_assert!((b[0].flash_frequency_hz - a[0].flash_frequency_hz).abs() < 1e-9);
        prop_assert!((a[0].flash_frequency_hz - freq).abs() < 0.5);
    }

    #[test]
    fn bandpass_has_zero_lag(seed in any::<u64>()) {
        let fs = 200.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tones: Vec<(f64, f64)> = (0..5).map(|_| (rng.gen_range(3.0..30.0), rng.gen_range(0.0..2.0 * PI))).collect();
        let x: Vec<f64> = (0..1600)
            .map(|i| tones.iter().map(|(f, p)| (2.0 * PI * f * i as f64 / fs + p).sin()).sum())
            .collect();
        let y = bandpass_zero_phase(&x, fs, 1.0, 40.0, 4).unwrap();
        prop_assert_eq!(xcorr_peak_lag(&x, &y, 20), 0);
    }

    #[test]
    fn rejection_mask_ignores_global_scale(seed in any::<u64>(), c in 1e-3f64..1e3, burst in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<Vec<f64>> = (0..3).map(|_| (0..4000).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        for v in &mut x[1][burst * 100..(burst + 1) * 100] {
            *v *= 25.0;
        }
        let rule = RmsRule { absolute_ceiling_uv: None, ..RmsRule::default() };
        let a = rms_artifact_reject(&x, 100.0, 1.0, &rule).unwrap();
        let b = rms_artifact_reject(&scaled(&x, c), 100.0, 1.0, &rule).unwrap();
        prop_assert!(a.mask[burst]);
        prop_assert_eq!(a.mask, b.mask);
    }

    #[test]
    fn relative_powers_sum_to_one(seed in any::<u64>()) {
        let w = gaussian_window(seed, 3, 400);
        let (v, _) = extract_window(Family::Spectral, &w, 200.0).unwrap();
        for ch in v.chunks(5) {
            prop_assert!((ch.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coupling_values_are_bounded(seed in any::<u64>()) {
        let w = gaussian_window(seed, 4, 400);
        for family in [Family::Cc, Family::Plv] {
            let (v, _) = extract_window(family, &w, 200.0).unwrap();
            prop_assert!(v.iter().all(|x| (0.0..=1.0 + 1e-12).contains(x)), "{}: {:?}", family.name(), v);
        }
    }

    #[test]
    fn scale_free_families_ignore_amplitude(seed in any::<u64>(), c in 1e-2f64..1e2) {
        let w = gaussian_window(seed, 3, 400);
        let ws = scaled(&w, c);
        for family in [Family::Spectral, Family::Cc, Family::Plv, Family::Gcc, Family::Gplv] {
            let (a, _) = extract_window(family, &w, 200.0).unwrap();
            let (b, _) = extract_window(family, &ws, 200.0).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12), "{}: {} {}", family.name(), x, y);
            }
        }
    }

    #[test]
    fn stacking_weights_follow_column_permutation(seed in any::<u64>(), k in 2usize..6, n in 8usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let p: Vec<Vec<f64>> = y
            .iter()
            .map(|&t| (0..k).map(|j| (t as f64 - 0.5) * j as f64 * 0.8 + rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.rotate_left(1);
        perm.swap(0, k - 1);
        let permuted: Vec<Vec<f64>> = p.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let a = fit_stack(&StackInputs::new(p, y.clone())).unwrap();
        let b = fit_stack(&StackInputs::new(permuted, y)).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            prop_assert!((b.weights[i] - a.weights[j]).abs() < 1e-6, "{:?} {:?}", a.weights, b.weights);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn hv_index_ignores_recording_scale(seed in 0u64..1000, c in 0.05f64..20.0) {
        let spec = SynthSpec { n_per_class: 1, resting_s: 10.0, hv_s: 120.0, hv_slowing_gain: 1.0, seed, ..SynthSpec::default() };
        let mut rec = gen_subject(&spec, 0).recording;
        let a = subject_slowing(&rec).unwrap().s_raw.unwrap();
        rec.data = scaled(&rec.data, c);
        let b = subject_slowing(&rec).unwrap().s_raw.unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{} {}", a, b);
    }
}
