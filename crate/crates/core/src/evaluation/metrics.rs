use serde::{Deserialize, Serialize};

use super::EvalError;

/// Posterior probability that defines the clinically relevant ROC region.
pub const CLINICAL_POSTERIOR: f64 = 0.6;
pub const TARGET_SENSITIVITY: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// decision rule `score >= threshold`; `None` for the origin
    pub threshold: Option<f64>,
}

fn check(scores: &[f64], y: &[u8]) -> Result<(usize, usize), EvalError> {
    if scores.len() != y.len() {
        return Err(EvalError::LengthMismatch { subjects: scores.len(), labels: y.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::Metric("NaN score".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score.
fn order_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Mann-Whitney concordance `(concordant + ties / 2) / (n+ n-)`, counted in
/// integers so that the result is exact.
pub fn compute_auc(scores: &[f64], y: &[u8]) -> Result<f64, EvalError> {
    let (pos, neg) = check(scores, y)?;
    let idx = order_desc(scores);
    let (mut concordant, mut ties) = (0u64, 0u64);
    let mut neg_above = 0u64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut p, mut q) = (0u64, 0u64);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if y[idx[j]] == 1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        // positives in this group beat every negative strictly below them
        concordant += p * (neg as u64 - neg_above - q);
        ties += p * q;
        neg_above += q;
        i = j;
    }
    Ok((2 * concordant + ties) as f64 / (2 * pos as u64 * neg as u64) as f64)
}

/// ROC vertices from (0,0) to (1,1), one per distinct score.
pub fn roc_curve(scores: &[f64], y: &[u8]) -> Result<Vec<RocPoint>, EvalError> {
    let (pos, neg) = check(scores, y)?;
    let idx = order_desc(scores);
    let mut pts = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: None }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if y[idx[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        pts.push(RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64, threshold: Some(s) });
    }
    Ok(pts)
}

/// False-positive rate where the ROC path first reaches `sens`, linearly
/// interpolated between the bracketing vertices.
pub fn fpr_at_sensitivity(roc: &[RocPoint], sens: f64) -> Result<f64, EvalError> {
    let k = roc
        .iter()
        .position(|p| p.tpr >= sens)
        .ok_or_else(|| EvalError::Metric(format!("ROC never reaches sensitivity {sens}")))?;
    let b = roc[k];
    if b.tpr == sens || k == 0 {
        return Ok(b.fpr);
    }
    let a = roc[k - 1];
    Ok(a.fpr + (sens - a.tpr) / (b.tpr - a.tpr) * (b.fpr - a.fpr))
}

/// Balanced accuracy with sensitivity pinned at `sens`.
pub fn compute_bac_at_sens(roc: &[RocPoint], sens: f64) -> Result<f64, EvalError> {
    Ok(0.5 * (sens + 1.0 - fpr_at_sensitivity(roc, sens)?))
}

/// Slope of the line `TPR = slope * FPR` above which a positive call has at
/// least `p_posterior` posterior probability at class priors `p1`, `p0`.
pub fn clinically_relevant_line(p_posterior: f64, p1: f64, p0: f64) -> Result<f64, EvalError> {
    if !(p1 > 0.0 && p1 < 1.0 && p0 > 0.0 && p0 < 1.0) || (p1 + p0 - 1.0).abs() > 1e-9 {
        return Err(EvalError::InvalidPrevalence { p1, p0 });
    }
    if !(p_posterior > 0.0 && p_posterior < 1.0) {
        return Err(EvalError::Metric(format!("posterior {p_posterior} outside (0, 1)")));
    }
    Ok(p_posterior * p0 / (p1 * (1.0 - p_posterior)))
}

pub fn is_clinically_relevant(fpr: f64, tpr: f64, slope: f64) -> bool {
    tpr > slope * fpr
}

/// Confusion counts of hard decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    pub fn from_decisions(decisions: &[bool], y: &[u8]) -> Confusion {
        let mut c = Confusion::default();
        for (&d, &y) in decisions.iter().zip(y) {
            match (d, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.r#fn += 1,
            }
        }
        c
    }

    fn ratio(a: usize, b: usize) -> f64 {
        if b == 0 {
            0.0
        } else {
            a as f64 / b as f64
        }
    }

    pub fn sensitivity(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.r#fn)
    }

    pub fn specificity(&self) -> f64 {
        Self::ratio(self.tn, self.tn + self.fp)
    }

    pub fn ppv(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    pub fn fpr(&self) -> f64 {
        1.0 - self.specificity()
    }

    pub fn bac(&self) -> f64 {
        0.5 * (self.sensitivity() + self.specificity())
    }

    pub fn gmean(&self) -> f64 {
        (self.ppv() * self.sensitivity()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn brute_auc(s: &[f64], y: &[u8]) -> f64 {
        let (mut c, mut t, mut n) = (0u64, 0u64, 0u64);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] == 1 && y[j] == 0 {
                    n += 1;
                    if s[i] > s[j] {
                        c += 1;
                    } else if s[i] == s[j] {
                        t += 1;
                    }
                }
            }
        }
        (2 * c + t) as f64 / (2 * n) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(compute_auc(&[0.2, 0.8], &[0, 1]).unwrap(), 1.0);
        assert_eq!(compute_auc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert_eq!(compute_auc(&[0.9, 0.1], &[0, 1]).unwrap(), 0.0);
        assert!(matches!(compute_auc(&[0.1, 0.2], &[1, 1]), Err(EvalError::SingleClass)));
    }

    #[test]
    fn bac_examples() {
        let perfect = roc_curve(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert_eq!(compute_bac_at_sens(&perfect, 0.8).unwrap(), 0.9);
        let diag = [
            RocPoint { fpr: 0.0, tpr: 0.0, threshold: None },
            RocPoint { fpr: 1.0, tpr: 1.0, threshold: Some(0.0) },
        ];
        assert!((compute_bac_at_sens(&diag, 0.8).unwrap() - 0.5).abs() < 1e-15);
        let c = Confusion { tp: 8, r#fn: 2, tn: 9, fp: 1 };
        assert!((c.bac() - 0.85).abs() < 1e-15);
    }

    #[test]
    fn interpolates_between_vertices() {
        // five positives: tpr jumps 0.6 -> 1.0 while fpr goes 0.25 -> 0.75
        let roc = [
            RocPoint { fpr: 0.0, tpr: 0.0, threshold: None },
            RocPoint { fpr: 0.25, tpr: 0.6, threshold: Some(2.0) },
            RocPoint { fpr: 0.75, tpr: 1.0, threshold: Some(1.0) },
        ];
        assert!((fpr_at_sensitivity(&roc, 0.8).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clinical_slopes() {
        assert!((clinically_relevant_line(0.6, 0.5, 0.5).unwrap() - 1.5).abs() < 1e-15);
        let s = clinically_relevant_line(0.6, 40.0 / 141.0, 101.0 / 141.0).unwrap();
        assert!((s - 3.7875).abs() < 1e-9, "{s}");
        assert!(is_clinically_relevant(0.0, 1e-9, s));
        assert!(!is_clinically_relevant(0.5, 0.9, s));
        assert!(clinically_relevant_line(0.6, 0.0, 1.0).is_err());
    }

    #[test]
    fn roc_is_monotone_staircase() {
        let roc = roc_curve(&[0.3, 0.3, 0.5, 0.1, 0.9], &[1, 0, 1, 0, 0]).unwrap();
        assert_eq!(roc.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(roc.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        assert_eq!(roc.len(), 5);
        for w in roc.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    proptest! {
        #[test]
        fn auc_matches_pair_count(seed in 0u64..100_000, n in 2usize..31) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            y[0] = 0;
            y[1] = 1;
            // coarse scores so that ties happen
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 / 4.0).collect();
            prop_assert_eq!(compute_auc(&s, &y).unwrap(), brute_auc(&s, &y));
        }

        #[test]
        fn auc_invariant_under_monotone_maps(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
            let s: Vec<f64> = (0..20).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let t: Vec<f64> = s.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
            let u: Vec<f64> = s.iter().map(|v| v * v * v + 2.0 * v).collect();
            let a = compute_auc(&s, &y).unwrap();
            prop_assert_eq!(a, compute_auc(&t, &y).unwrap());
            prop_assert_eq!(a, compute_auc(&u, &y).unwrap());
        }

        #[test]
        fn trapezoid_area_equals_auc(seed in 0u64..10_000, n in 2usize..25) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            y[0] = 1;
            y[1] = 0;
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64).collect();
            let roc = roc_curve(&s, &y).unwrap();
            let area: f64 = roc.windows(2).map(|w| (w[1].fpr - w[0].fpr) * 0.5 * (w[0].tpr + w[1].tpr)).sum();
            prop_assert!((area - compute_auc(&s, &y).unwrap()).abs() < 1e-12);
        }
    }
}
