//! Simplex-weighted logistic stacking of base-model log-odds and GMean
//! threshold selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbdt::{sigmoid, GbdtError, TrainedBaseModel};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const MAX_BASE_MODELS: usize = 10;
const MAX_ITER: usize = 10_000;
const TOL: f64 = 1e-8;
const STEP: f64 = 0.5;
const MAX_HALVINGS: usize = 60;
const MAX_STEP: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StackError {
    #[error("stacking needs at least one row and one base model")]
    Empty,
    #[error("between 1 and {MAX_BASE_MODELS} base models are supported, got {0}")]
    TooManyModels(usize),
    #[error("non-finite log-odds at row {row}, model {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} has {found} columns, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("both classes must be present")]
    SingleClass,
    #[error("barrier coefficient must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Base(#[from] GbdtError),
}

/// N x K base-model log-odds with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StackInputs {
    pub p: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub alpha: f64,
}

impl StackInputs {
    pub fn new(p: Vec<Vec<f64>>, y: Vec<u8>) -> Self {
        StackInputs { p, y, alpha: DEFAULT_ALPHA }
    }

    fn validate(&self) -> Result<usize, StackError> {
        let k = self.p.first().map_or(0, Vec::len);
        if self.p.is_empty() || k == 0 {
            return Err(StackError::Empty);
        }
        if k > MAX_BASE_MODELS {
            return Err(StackError::TooManyModels(k));
        }
        if self.p.len() != self.y.len() {
            return Err(StackError::LengthMismatch { rows: self.p.len(), labels: self.y.len() });
        }
        for (row, r) in self.p.iter().enumerate() {
            if r.len() != k {
                return Err(StackError::DimensionMismatch { row, expected: k, found: r.len() });
            }
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(StackError::NonFinite { row, col });
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(StackError::InvalidAlpha(self.alpha));
        }
        if !self.y.contains(&1) || !self.y.iter().any(|&v| v != 1) {
            return Err(StackError::SingleClass);
        }
        Ok(k)
    }
}

/// -log σ(u), stable for large |u|.
fn neg_log_sigmoid(u: f64) -> f64 {
    (-u.abs()).exp().ln_1p() + (-u).max(0.0)
}

fn margins(p: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    p.iter().map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
}

/// Stacking objective: mean of `-y log σ(z) - (1-y) log σ(1-z)` plus
/// `-α Σ log w_k`. Infinite outside the open simplex.
pub fn stack_objective(w: &[f64], p: &[Vec<f64>], y: &[u8], alpha: f64) -> f64 {
    if w.iter().any(|&v| v <= 0.0) {
        return f64::INFINITY;
    }
    let z = margins(p, w);
    let data: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| if y == 1 { neg_log_sigmoid(z) } else { neg_log_sigmoid(1.0 - z) })
        .sum();
    data / z.len() as f64 - alpha * w.iter().map(|v| v.ln()).sum::<f64>()
}

fn gradient(w: &[f64], p: &[Vec<f64>], y: &[u8], alpha: f64) -> Vec<f64> {
    let z = margins(p, w);
    let n = z.len() as f64;
    let mut g: Vec<f64> = w.iter().map(|v| -alpha / v).collect();
    for ((r, &z), &y) in p.iter().zip(&z).zip(y) {
        // d/dz of the per-row loss
        let d = if y == 1 { -sigmoid(-z) } else { sigmoid(z - 1.0) };
        for (gk, pk) in g.iter_mut().zip(r) {
            *gk += d * pk / n;
        }
    }
    g
}

fn eg_step(w: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    let a: Vec<f64> = w.iter().zip(g).map(|(w, g)| w.ln() - eta * g).collect();
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackFit {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Exponentiated-gradient descent from the uniform weights with a
/// backtracking step: the first trial step is 0.5, a rejected step is halved
/// and an accepted one is doubled for the next iteration.
pub fn fit_stack(inputs: &StackInputs) -> Result<StackFit, StackError> {
    let k = inputs.validate()?;
    let (p, y, alpha) = (&inputs.p, &inputs.y, inputs.alpha);
    let mut w = vec![1.0 / k as f64; k];
    let mut f = stack_objective(&w, p, y, alpha);
    if k == 1 {
        return Ok(StackFit { weights: w, objective: f, iterations: 0, converged: true });
    }
    let mut eta = STEP;
    for it in 1..=MAX_ITER {
        let g = gradient(&w, p, y, alpha);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = eg_step(&w, &g, eta);
            let fc = stack_objective(&cand, p, y, alpha);
            if fc <= f {
                accepted = Some((cand, fc));
                break;
            }
            eta *= 0.5;
        }
        eta = (2.0 * eta).min(MAX_STEP);
        let Some((next, fnext)) = accepted else {
            return Ok(StackFit { weights: w, objective: f, iterations: it, converged: true });
        };
        debug_assert!((next.iter().sum::<f64>() - 1.0).abs() < 1e-9 && next.iter().all(|&v| v > 0.0));
        let delta = w.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        w = next;
        f = fnext;
        if delta < TOL {
            return Ok(StackFit { weights: w, objective: f, iterations: it, converged: true });
        }
    }
    log::warn!("stacking did not converge in {MAX_ITER} iterations; returning the best iterate");
    Ok(StackFit { weights: w, objective: f, iterations: MAX_ITER, converged: false })
}

/// σ(Σ w_k p_k), kept strictly inside (0, 1).
pub fn predict_stack(weights: &[f64], log_odds: &[f64]) -> Result<f64, StackError> {
    Ok(probability(stacked_log_odds(weights, log_odds)?))
}

pub fn stacked_log_odds(weights: &[f64], log_odds: &[f64]) -> Result<f64, StackError> {
    if weights.len() != log_odds.len() {
        return Err(StackError::DimensionMismatch { row: 0, expected: weights.len(), found: log_odds.len() });
    }
    Ok(weights.iter().zip(log_odds).map(|(a, b)| a * b).sum())
}

/// σ(z) clamped to the open unit interval.
pub fn probability(z: f64) -> f64 {
    sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub gmean: f64,
}

/// sqrt(PPV * TPR) of the decision `p >= t`; zero when nothing is
/// predicted positive.
pub fn gmean_at(probs: &[f64], y: &[u8], t: f64) -> f64 {
    let (mut tp, mut fp, mut pos) = (0usize, 0usize, 0usize);
    for (&p, &y) in probs.iter().zip(y) {
        pos += (y == 1) as usize;
        if p >= t {
            if y == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    if tp + fp == 0 || pos == 0 {
        return 0.0;
    }
    (tp as f64 / (tp + fp) as f64 * tp as f64 / pos as f64).sqrt()
}

/// Candidate thresholds: midpoints of consecutive values of the sorted
/// unique probabilities with 0 and 1 appended. A probability of exactly 0
/// adds 0 itself so that predicting everything positive stays reachable.
pub fn threshold_candidates(probs: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = probs.iter().copied().chain([0.0, 1.0]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let zero = probs.contains(&0.0).then_some(0.0);
    zero.into_iter().chain(v.windows(2).map(|w| 0.5 * (w[0] + w[1]))).collect()
}

/// GMean-maximizing threshold; ties resolve to the larger threshold.
pub fn select_threshold_gmean(probs: &[f64], y: &[u8]) -> Result<ThresholdChoice, StackError> {
    if probs.len() != y.len() {
        return Err(StackError::LengthMismatch { rows: probs.len(), labels: y.len() });
    }
    if let Some(row) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(StackError::NonFinite { row, col: 0 });
    }
    if !y.contains(&1) || !y.contains(&0) {
        return Err(StackError::SingleClass);
    }
    let mut best = ThresholdChoice { threshold: f64::NAN, gmean: f64::NEG_INFINITY };
    for t in threshold_candidates(probs) {
        let g = gmean_at(probs, y, t);
        if g >= best.gmean {
            best = ThresholdChoice { threshold: t, gmean: g };
        }
    }
    Ok(best)
}

/// Fitted ensemble: one base model per feature configuration, simplex
/// weights and a frozen threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub config_ids: Vec<String>,
    pub base_models: Vec<TrainedBaseModel>,
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl EnsembleModel {
    /// Stacked probability for one subject given one feature row per base model.
    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Result<f64, StackError> {
        if rows.len() != self.base_models.len() {
            return Err(StackError::DimensionMismatch { row: 0, expected: self.base_models.len(), found: rows.len() });
        }
        let mut z = Vec::with_capacity(rows.len());
        for (m, r) in self.base_models.iter().zip(rows) {
            z.push(m.predict_log_odds(std::slice::from_ref(r))?[0]);
        }
        predict_stack(&self.weights, &z)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<bool, StackError> {
        Ok(self.predict_proba(rows)? >= self.threshold)
    }
}
