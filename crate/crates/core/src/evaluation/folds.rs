use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::seed::derive_seed;

use super::EvalError;

/// Share of the training subjects held out for stacking validation.
pub const VALID_FRACTION: f64 = 0.3;
const MAX_REDRAWS: usize = 100;

/// One leave-one-subject-out fold with its subject-level inner split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub test_subject: String,
    pub train_subjects: Vec<String>,
    pub inner_train_subjects: Vec<String>,
    pub valid_subjects: Vec<String>,
    pub seed: u64,
}

impl FoldPlan {
    /// Panics if the plan breaks any subject-disjointness rule.
    pub fn assert_consistent(&self) {
        assert!(!self.train_subjects.contains(&self.test_subject), "test subject in training set");
        let inner: HashSet<&String> = self.inner_train_subjects.iter().collect();
        let valid: HashSet<&String> = self.valid_subjects.iter().collect();
        assert!(inner.is_disjoint(&valid), "validation overlaps inner training");
        let union: HashSet<&String> = inner.union(&valid).copied().collect();
        let train: HashSet<&String> = self.train_subjects.iter().collect();
        assert_eq!(union, train, "inner split does not cover the training set");
    }
}

/// Number of validation positives: proportional, but keeping at least one of
/// each class on both sides when the counts allow it.
fn valid_positives(n_valid: usize, pos: usize, neg: usize) -> usize {
    let n = pos + neg;
    let mut k = (n_valid as f64 * pos as f64 / n as f64).round() as usize;
    let lo = usize::from(pos >= 2 && n_valid >= 2).max(n_valid.saturating_sub(neg));
    let hi = pos.saturating_sub(1).min(n_valid.saturating_sub(usize::from(neg >= 2)));
    if lo <= hi {
        k = k.clamp(lo, hi);
    }
    k.min(pos).min(n_valid)
}

/// LOSO folds in subject order. The remaining subjects of each fold are
/// split floor(70%) / ceil(30%) into inner-train / validation, stratified by
/// label. Labels are 0/1 per subject.
pub fn loso_folds(subject_ids: &[String], labels: &[u8], seed: u64) -> Result<Vec<FoldPlan>, EvalError> {
    let n = subject_ids.len();
    if n != labels.len() {
        return Err(EvalError::LengthMismatch { subjects: n, labels: labels.len() });
    }
    if n < 3 {
        return Err(EvalError::TooFewSubjects(n));
    }
    if !labels.contains(&1) || !labels.contains(&0) {
        return Err(EvalError::SingleClass);
    }
    let mut seen = HashSet::new();
    if let Some(dup) = subject_ids.iter().find(|s| !seen.insert(*s)) {
        return Err(EvalError::DuplicateSubject(dup.clone()));
    }
    (0..n)
        .map(|t| {
            let train: Vec<usize> = (0..n).filter(|&i| i != t).collect();
            let n_valid = (VALID_FRACTION * train.len() as f64).ceil() as usize;
            let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = train.iter().partition(|&&i| labels[i] == 1);
            let k = valid_positives(n_valid, pos.len(), neg.len());
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, t as u64]));
            for _ in 0..MAX_REDRAWS {
                pos.shuffle(&mut rng);
                neg.shuffle(&mut rng);
                let mut valid: Vec<usize> = pos[..k].iter().chain(&neg[..n_valid - k]).copied().collect();
                valid.sort_unstable();
                let inner: Vec<usize> = train.iter().copied().filter(|i| !valid.contains(i)).collect();
                let inner_pos = inner.iter().filter(|&&i| labels[i] == 1).count();
                if inner_pos == 0 || inner_pos == inner.len() {
                    continue;
                }
                let ids = |v: &[usize]| v.iter().map(|&i| subject_ids[i].clone()).collect::<Vec<_>>();
                let plan = FoldPlan {
                    test_subject: subject_ids[t].clone(),
                    train_subjects: ids(&train),
                    inner_train_subjects: ids(&inner),
                    valid_subjects: ids(&valid),
                    seed,
                };
                plan.assert_consistent();
                return Ok(plan);
            }
            Err(EvalError::InnerSplit { test_subject: subject_ids[t].clone(), tries: MAX_REDRAWS })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:02}")).collect()
    }

    #[test]
    fn ten_subjects_ten_folds() {
        let y = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0];
        let folds = loso_folds(&ids(10), &y, 3).unwrap();
        assert_eq!(folds.len(), 10);
        for (i, f) in folds.iter().enumerate() {
            assert_eq!(f.test_subject, format!("s{i:02}"));
            assert_eq!(f.train_subjects.len(), 9);
            assert_eq!((f.inner_train_subjects.len(), f.valid_subjects.len()), (6, 3));
            let lab = |s: &String| y[s[1..].parse::<usize>().unwrap()];
            let vp = f.valid_subjects.iter().filter(|s| lab(s) == 1).count();
            assert!(vp >= 1 && vp < f.valid_subjects.len(), "fold {i}");
            f.assert_consistent();
        }
    }

    #[test]
    fn every_subject_tested_once() {
        let y: Vec<u8> = (0..23).map(|i| (i % 3 == 0) as u8).collect();
        let folds = loso_folds(&ids(23), &y, 0).unwrap();
        let tested: HashSet<&String> = folds.iter().map(|f| &f.test_subject).collect();
        assert_eq!(tested.len(), 23);
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let y: Vec<u8> = (0..12).map(|i| (i % 2) as u8).collect();
        assert_eq!(loso_folds(&ids(12), &y, 5).unwrap(), loso_folds(&ids(12), &y, 5).unwrap());
        assert_ne!(loso_folds(&ids(12), &y, 5).unwrap(), loso_folds(&ids(12), &y, 6).unwrap());
    }

    #[test]
    fn minimal_and_invalid_cohorts() {
        // one subject per class left in training: no stratified inner split exists
        assert!(matches!(loso_folds(&ids(3), &[1, 0, 1], 0), Err(EvalError::InnerSplit { .. })));
        assert!(matches!(loso_folds(&ids(2), &[1, 0], 0), Err(EvalError::TooFewSubjects(2))));
        assert!(matches!(loso_folds(&ids(4), &[1; 4], 0), Err(EvalError::SingleClass)));
        let dup = vec!["a".to_string(), "a".to_string(), "b".to_string()];
        assert!(matches!(loso_folds(&dup, &[1, 0, 0], 0), Err(EvalError::DuplicateSubject(_))));
    }

    #[test]
    fn valid_positive_counts() {
        assert_eq!(valid_positives(3, 5, 4), 2);
        assert_eq!(valid_positives(3, 1, 8), 0);
        assert_eq!(valid_positives(3, 8, 1), 3);
        assert_eq!(valid_positives(3, 2, 7), 1);
    }
}
