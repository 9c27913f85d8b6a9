//! EDF reader and writer.
//!
//! Layout: a 256-byte fixed header, then 256 bytes per signal (each field
//! stored as one block of `ns` consecutive fixed-width ASCII entries), then
//! data records of 16-bit little-endian two's-complement samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdfError {
    #[error("truncated header: need {needed} bytes at offset {offset}, file has {available}")]
    TruncatedHeader {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("header size mismatch at offset 184: field says {found}, {n_signals} signals need {expected}")]
    HeaderSizeMismatch {
        found: usize,
        expected: usize,
        n_signals: usize,
    },
    #[error("non-numeric {field} field at offset {offset}: {text:?}")]
    NonNumeric {
        field: &'static str,
        offset: usize,
        text: String,
    },
    #[error("invalid {field} at offset {offset}: {reason}")]
    InvalidField {
        field: &'static str,
        offset: usize,
        reason: String,
    },
    #[error("record count inconsistent with file size at offset {offset}: header declares {declared} records of {record_bytes} bytes, data section holds {data_bytes} bytes")]
    RecordCountMismatch {
        offset: usize,
        declared: i64,
        record_bytes: usize,
        data_bytes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartDateTime {
    pub year: u16,
    pub month: u8,
    pub day: u8,
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
}

impl Default for StartDateTime {
    fn default() -> Self {
        StartDateTime { year: 2000, month: 1, day: 1, hour: 0, minute: 0, second: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

impl SignalHeader {
    /// Affine digital-to-physical map.
    pub fn calibrate(&self, digital: i32) -> f64 {
        let gain = (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64;
        self.physical_min + (digital - self.digital_min) as f64 * gain
    }

    /// Sampling rate given the record duration.
    pub fn sample_rate(&self, record_duration_s: f64) -> f64 {
        self.samples_per_record as f64 / record_duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start: StartDateTime,
    pub header_bytes: usize,
    pub n_records: usize,
    pub record_duration_s: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    fn record_bytes(&self) -> usize {
        2 * self.signals.iter().map(|s| s.samples_per_record).sum::<usize>()
    }
}

/// Parsed file: header plus one physical-unit vector per signal at its
/// native rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfFile {
    pub header: EdfHeader,
    pub signals: Vec<Vec<f64>>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, len: usize) -> Result<(String, usize), EdfError> {
        let offset = self.pos;
        if self.bytes.len() < offset + len {
            return Err(EdfError::TruncatedHeader {
                offset,
                needed: len,
                available: self.bytes.len(),
            });
        }
        self.pos += len;
        // latin-1, so a raw 0xB5 reads as the micro sign
        let text = self.bytes[offset..offset + len].iter().map(|&b| b as char).collect();
        Ok((text, offset))
    }

    fn text(&mut self, len: usize) -> Result<String, EdfError> {
        Ok(self.take(len)?.0.trim_end().to_string())
    }

    fn number<T: std::str::FromStr>(&mut self, len: usize, field: &'static str) -> Result<(T, usize), EdfError> {
        let (raw, offset) = self.take(len)?;
        let trimmed = raw.trim();
        trimmed.parse::<T>().map(|v| (v, offset)).map_err(|_| EdfError::NonNumeric {
            field,
            offset,
            text: raw.clone(),
        })
    }
}

fn parse_date_time(date: &str, time: &str, offset: usize) -> Result<StartDateTime, EdfError> {
    let parts = |s: &str, field: &'static str, off: usize| -> Result<[u8; 3], EdfError> {
        let v: Vec<&str> = s.trim().split(['.', ':']).collect();
        if v.len() != 3 {
            return Err(EdfError::NonNumeric { field, offset: off, text: s.to_string() });
        }
        let mut out = [0u8; 3];
        for (o, p) in out.iter_mut().zip(v) {
            *o = p.trim().parse().map_err(|_| EdfError::NonNumeric {
                field,
                offset: off,
                text: s.to_string(),
            })?;
        }
        Ok(out)
    };
    let [day, month, yy] = parts(date, "startdate", offset)?;
    let [hour, minute, second] = parts(time, "starttime", offset + 8)?;
    // EDF two-digit year clipping rule
    let year = if yy >= 85 { 1900 + yy as u16 } else { 2000 + yy as u16 };
    Ok(StartDateTime { year, month, day, hour, minute, second })
}

/// Parse a complete EDF byte stream.
pub fn parse_edf(bytes: &[u8]) -> Result<EdfFile, EdfError> {
    let mut c = Cursor { bytes, pos: 0 };
    let version = c.text(8)?;
    let patient_id = c.text(80)?;
    let recording_id = c.text(80)?;
    let (date, date_off) = c.take(8)?;
    let (time, _) = c.take(8)?;
    let start = parse_date_time(&date, &time, date_off)?;
    let (header_bytes, _) = c.number::<i64>(8, "header bytes")?;
    c.take(44)?;
    let (n_records, nr_off) = c.number::<i64>(8, "number of records")?;
    let (record_duration_s, rd_off) = c.number::<f64>(8, "record duration")?;
    let (ns, ns_off) = c.number::<i64>(4, "number of signals")?;
    if ns < 1 {
        return Err(EdfError::InvalidField {
            field: "number of signals",
            offset: ns_off,
            reason: format!("{ns} signals"),
        });
    }
    let ns = ns as usize;
    let expected = 256 + 256 * ns;
    if header_bytes < 0 || header_bytes as usize != expected {
        return Err(EdfError::HeaderSizeMismatch {
            found: header_bytes.max(0) as usize,
            expected,
            n_signals: ns,
        });
    }
    if !(record_duration_s > 0.0) {
        return Err(EdfError::InvalidField {
            field: "record duration",
            offset: rd_off,
            reason: format!("{record_duration_s} s"),
        });
    }

    let labels = (0..ns).map(|_| c.text(16)).collect::<Result<Vec<_>, _>>()?;
    let transducers = (0..ns).map(|_| c.text(80)).collect::<Result<Vec<_>, _>>()?;
    let dims = (0..ns).map(|_| c.text(8)).collect::<Result<Vec<_>, _>>()?;
    let pmin = (0..ns).map(|_| c.number::<f64>(8, "physical minimum")).collect::<Result<Vec<_>, _>>()?;
    let pmax = (0..ns).map(|_| c.number::<f64>(8, "physical maximum")).collect::<Result<Vec<_>, _>>()?;
    let dmin = (0..ns).map(|_| c.number::<i32>(8, "digital minimum")).collect::<Result<Vec<_>, _>>()?;
    let dmax = (0..ns).map(|_| c.number::<i32>(8, "digital maximum")).collect::<Result<Vec<_>, _>>()?;
    let prefilter = (0..ns).map(|_| c.text(80)).collect::<Result<Vec<_>, _>>()?;
    let spr = (0..ns).map(|_| c.number::<i64>(8, "samples per record")).collect::<Result<Vec<_>, _>>()?;
    c.take(32 * ns)?;

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if !(pmax[i].0 > pmin[i].0) {
            return Err(EdfError::InvalidField {
                field: "physical maximum",
                offset: pmax[i].1,
                reason: format!("physical range [{}, {}] of signal {i} is empty", pmin[i].0, pmax[i].0),
            });
        }
        if dmax[i].0 <= dmin[i].0 {
            return Err(EdfError::InvalidField {
                field: "digital maximum",
                offset: dmax[i].1,
                reason: format!("digital range [{}, {}] of signal {i} is empty", dmin[i].0, dmax[i].0),
            });
        }
        if spr[i].0 < 1 {
            return Err(EdfError::InvalidField {
                field: "samples per record",
                offset: spr[i].1,
                reason: format!("{} samples in signal {i}", spr[i].0),
            });
        }
        signals.push(SignalHeader {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmin[i].0,
            physical_max: pmax[i].0,
            digital_min: dmin[i].0,
            digital_max: dmax[i].0,
            prefiltering: prefilter[i].clone(),
            samples_per_record: spr[i].0 as usize,
        });
    }

    let mut header = EdfHeader {
        version,
        patient_id,
        recording_id,
        start,
        header_bytes: expected,
        n_records: 0,
        record_duration_s,
        signals,
    };
    let record_bytes = header.record_bytes();
    let data_bytes = bytes.len() - expected;
    let n_records = if n_records == -1 {
        // continuous recording with unknown count: derive from size
        if data_bytes % record_bytes != 0 {
            return Err(EdfError::RecordCountMismatch {
                offset: nr_off,
                declared: -1,
                record_bytes,
                data_bytes,
            });
        }
        data_bytes / record_bytes
    } else if n_records < 0 || n_records as usize * record_bytes != data_bytes {
        return Err(EdfError::RecordCountMismatch {
            offset: nr_off,
            declared: n_records,
            record_bytes,
            data_bytes,
        });
    } else {
        n_records as usize
    };
    header.n_records = n_records;

    let mut out: Vec<Vec<f64>> = header
        .signals
        .iter()
        .map(|s| Vec::with_capacity(s.samples_per_record * n_records))
        .collect();
    let data = &bytes[expected..];
    let mut pos = 0;
    for _ in 0..n_records {
        for (sig, dst) in header.signals.iter().zip(out.iter_mut()) {
            for _ in 0..sig.samples_per_record {
                let d = i16::from_le_bytes([data[pos], data[pos + 1]]);
                dst.push(sig.calibrate(d as i32));
                pos += 2;
            }
        }
    }
    Ok(EdfFile { header, signals: out })
}

/// One signal to be written by [`write_edf`].
#[derive(Debug, Clone)]
pub struct EdfSignalSpec<'a> {
    pub label: &'a str,
    pub physical_dimension: &'a str,
    pub samples_per_record: usize,
    pub samples: &'a [f64],
}

fn field(s: &str, width: usize) -> Vec<u8> {
    let mut b: Vec<u8> = s.bytes().filter(|c| c.is_ascii() && !c.is_ascii_control()).take(width).collect();
    b.resize(width, b' ');
    b
}

/// Format `v` into at most 8 characters, rounding outward (down when
/// `down`) so the written value still bounds the data.
fn format_bound(v: f64, down: bool) -> String {
    for decimals in (0..=6).rev() {
        let scale = 10f64.powi(decimals);
        let r = if down { (v * scale).floor() / scale } else { (v * scale).ceil() / scale };
        let s = format!("{r:.prec$}", prec = decimals as usize);
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        let s = if s == "-0" { "0".to_string() } else { s };
        if s.len() <= 8 {
            return s;
        }
    }
    if down { "-9999999".into() } else { "99999999".into() }
}

/// Serialize signals into an EDF byte stream with 16-bit quantization over
/// the full digital range. Every signal's length must equal
/// `n_records * samples_per_record` for a common `n_records`.
pub fn write_edf(
    patient_id: &str,
    recording_id: &str,
    start: StartDateTime,
    record_duration_s: f64,
    signals: &[EdfSignalSpec<'_>],
) -> Result<Vec<u8>, EdfError> {
    let ns = signals.len();
    if ns == 0 {
        return Err(EdfError::InvalidField { field: "number of signals", offset: 252, reason: "no signals".into() });
    }
    let n_records = signals[0].samples.len() / signals[0].samples_per_record.max(1);
    for s in signals {
        if s.samples_per_record == 0 || s.samples.len() != n_records * s.samples_per_record {
            return Err(EdfError::InvalidField {
                field: "samples per record",
                offset: 0,
                reason: format!("signal {:?} length {} is not {} records", s.label, s.samples.len(), n_records),
            });
        }
    }
    let (dmin, dmax) = (-32768i32, 32767i32);
    let mut ranges = Vec::with_capacity(ns);
    for s in signals {
        let lo = s.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() || !hi.is_finite() || hi - lo < 1e-6 {
            (lo.min(0.0).floor() - 1.0, hi.max(0.0).ceil() + 1.0)
        } else {
            (lo, hi)
        };
        let (plo, phi) = (format_bound(lo, true), format_bound(hi, false));
        ranges.push((plo, phi));
    }

    let mut out = Vec::with_capacity(256 * (ns + 1) + n_records * 2 * signals.iter().map(|s| s.samples_per_record).sum::<usize>());
    out.extend(field("0", 8));
    out.extend(field(patient_id, 80));
    out.extend(field(recording_id, 80));
    out.extend(field(&format!("{:02}.{:02}.{:02}", start.day, start.month, start.year % 100), 8));
    out.extend(field(&format!("{:02}.{:02}.{:02}", start.hour, start.minute, start.second), 8));
    out.extend(field(&(256 + 256 * ns).to_string(), 8));
    out.extend(field("", 44));
    out.extend(field(&n_records.to_string(), 8));
    out.extend(field(&format_bound(record_duration_s, false), 8));
    out.extend(field(&ns.to_string(), 4));
    for s in signals {
        out.extend(field(s.label, 16));
    }
    for _ in signals {
        out.extend(field("", 80));
    }
    for s in signals {
        out.extend(field(s.physical_dimension, 8));
    }
    for (plo, _) in &ranges {
        out.extend(field(plo, 8));
    }
    for (_, phi) in &ranges {
        out.extend(field(phi, 8));
    }
    for _ in signals {
        out.extend(field(&dmin.to_string(), 8));
    }
    for _ in signals {
        out.extend(field(&dmax.to_string(), 8));
    }
    for _ in signals {
        out.extend(field("", 80));
    }
    for s in signals {
        out.extend(field(&s.samples_per_record.to_string(), 8));
    }
    for _ in signals {
        out.extend(field("", 32));
    }

    // quantize against the ranges exactly as a reader will parse them back
    let gains: Vec<(f64, f64)> = ranges
        .iter()
        .map(|(plo, phi)| {
            let lo: f64 = plo.parse().unwrap_or(0.0);
            let hi: f64 = phi.parse().unwrap_or(1.0);
            (lo, (hi - lo) / (dmax - dmin) as f64)
        })
        .collect();
    for r in 0..n_records {
        for (s, &(lo, gain)) in signals.iter().zip(&gains) {
            let chunk = &s.samples[r * s.samples_per_record..(r + 1) * s.samples_per_record];
            for &v in chunk {
                let d = ((v - lo) / gain + dmin as f64).round().clamp(dmin as f64, dmax as f64) as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_signal_file(pmin: &str, pmax: &str, samples: &[i16]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend(field("0", 8));
        b.extend(field("X", 80));
        b.extend(field("Y", 80));
        b.extend(field("01.02.03", 8));
        b.extend(field("04.05.06", 8));
        b.extend(field("512", 8));
        b.extend(field("", 44));
        b.extend(field("1", 8));
        b.extend(field("1", 8));
        b.extend(field("1", 4));
        b.extend(field("EEG FP1-REF", 16));
        b.extend(field("", 80));
        b.extend(field("uV", 8));
        b.extend(field(pmin, 8));
        b.extend(field(pmax, 8));
        b.extend(field("-32768", 8));
        b.extend(field("32767", 8));
        b.extend(field("", 80));
        b.extend(field(&samples.len().to_string(), 8));
        b.extend(field("", 32));
        for s in samples {
            b.extend_from_slice(&s.to_le_bytes());
        }
        b
    }

    #[test]
    fn calibration_of_digital_zero() {
        let f = parse_edf(&one_signal_file("-1000", "1000", &[0, -32768, 32767])).unwrap();
        // -1000 + 32768 * 2000 / 65535
        let expected = -1000.0 + 32768.0 * 2000.0 / 65535.0;
        assert!((f.signals[0][0] - expected).abs() < 1e-12);
        assert!((f.signals[0][0] - 0.0153).abs() < 1e-4);
        assert_eq!(f.signals[0][1], -1000.0);
        assert_eq!(f.signals[0][2], 1000.0);
        assert_eq!(f.header.start.year, 2003);
        assert_eq!(f.header.start.second, 6);
    }

    #[test]
    fn header_size_mismatch_reported() {
        let mut b = one_signal_file("-1", "1", &[0]);
        b[236..244].copy_from_slice(b"1       ");
        b[184..192].copy_from_slice(b"256     ");
        let err = parse_edf(&b).unwrap_err();
        assert!(err.to_string().contains("header size mismatch"), "{err}");
    }

    #[test]
    fn header_size_mismatch_with_two_signals() {
        let mut b = one_signal_file("-1", "1", &[0]);
        b[252..256].copy_from_slice(b"2   ");
        b[184..192].copy_from_slice(b"256     ");
        assert!(matches!(
            parse_edf(&b),
            Err(EdfError::HeaderSizeMismatch { found: 256, expected: 768, n_signals: 2 })
        ));
    }

    #[test]
    fn truncated_header_carries_offset() {
        let b = one_signal_file("-1", "1", &[0]);
        match parse_edf(&b[..300]) {
            Err(EdfError::TruncatedHeader { offset, .. }) => assert!(offset >= 256 && offset < 300),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_carries_offset() {
        let mut b = one_signal_file("-1", "1", &[0]);
        b[256 + 16 + 80 + 8..256 + 16 + 80 + 16].copy_from_slice(b"abc     ");
        match parse_edf(&b) {
            Err(EdfError::NonNumeric { offset, field, .. }) => {
                assert_eq!(offset, 360);
                assert_eq!(field, "physical minimum");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn record_count_must_match_size() {
        let mut b = one_signal_file("-1", "1", &[0, 1]);
        b.extend_from_slice(&[0, 0]);
        assert!(matches!(parse_edf(&b), Err(EdfError::RecordCountMismatch { offset: 236, .. })));
    }

    #[test]
    fn unknown_record_count_is_derived_from_size() {
        let mut b = one_signal_file("-1", "1", &[0, 1]);
        b[236..244].copy_from_slice(b"-1      ");
        b.extend_from_slice(&[5, 0, 6, 0]);
        let f = parse_edf(&b).unwrap();
        assert_eq!(f.header.n_records, 2);
        assert_eq!(f.signals[0].len(), 4);
    }

    #[test]
    fn format_bound_rounds_outward() {
        assert_eq!(format_bound(-123.456789, true), "-123.457");
        assert_eq!(format_bound(123.456789, false), "123.4568");
        assert_eq!(format_bound(1.0, false), "1");
        let v: f64 = format_bound(-0.0000001, true).parse().unwrap();
        assert!(v <= -0.0000001);
    }

    #[test]
    fn writer_output_parses() {
        let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.1).sin() * 50.0).collect();
        let bytes = write_edf(
            "P",
            "R",
            StartDateTime::default(),
            1.0,
            &[EdfSignalSpec { label: "Fp1", physical_dimension: "uV", samples_per_record: 200, samples: &x }],
        )
        .unwrap();
        let f = parse_edf(&bytes).unwrap();
        assert_eq!(f.header.n_records, 2);
        let step = (f.header.signals[0].physical_max - f.header.signals[0].physical_min) / 65535.0;
        for (a, b) in f.signals[0].iter().zip(&x) {
            assert!((a - b).abs() <= step);
        }
    }
}
