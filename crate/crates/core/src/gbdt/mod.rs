//! Second-order gradient boosting of regression trees on logistic loss.

mod tree;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::stats;

pub use tree::{Node, Tree};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbdtError {
    #[error("degenerate labels: training targets contain a single class")]
    DegenerateLabels,
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("labels must be 0 or 1, found {0}")]
    BadLabel(u8),
    #[error("training fold has no positive subjects")]
    NoPositives,
    #[error("model serialization: {0}")]
    Serialization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub subsample: f64,
    /// minimum split gain
    pub gamma: f64,
    pub learning_rate: f64,
    pub scale_pos_weight: f64,
    /// L2 penalty on leaf values
    pub l2_leaf_reg: f64,
    pub seed: u64,
    /// replace NaN by the training-column median before fitting/predicting
    pub impute_missing: bool,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_estimators: 100,
            max_depth: 6,
            subsample: 0.9,
            gamma: 0.1,
            learning_rate: 0.1,
            scale_pos_weight: 1.0,
            l2_leaf_reg: 1.0,
            seed: 0,
            impute_missing: true,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: &str| Err(GbdtError::InvalidParams(m.to_string()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be >= 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.scale_pos_weight > 0.0 && self.scale_pos_weight.is_finite()) {
            return bad("scale_pos_weight must be positive");
        }
        if !(self.l2_leaf_reg >= 0.0) || !(self.gamma >= 0.0) {
            return bad("l2_leaf_reg and gamma must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedBaseModel {
    pub format_version: u32,
    pub params: GbdtParams,
    pub base_score: f64,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    /// training medians used for imputation; `None` for all-missing columns
    pub medians: Vec<Option<f64>>,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of log-odds `z` against 0/1 targets.
pub fn logistic_loss(z: &[f64], y: &[u8]) -> f64 {
    let s: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| {
            // log(1 + e^-|z|) + max(z, 0) - y z
            (-z.abs()).exp().ln_1p() + z.max(0.0) - y as f64 * z
        })
        .sum();
    s / z.len() as f64
}

/// `#negatives / #positives` of a training fold.
pub fn scale_pos_weight_for_fold(y: &[u8]) -> Result<f64, GbdtError> {
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 {
        return Err(GbdtError::NoPositives);
    }
    if neg == 0 {
        return Err(GbdtError::DegenerateLabels);
    }
    Ok(neg as f64 / pos as f64)
}

fn column_medians(x: &[Vec<f64>], d: usize) -> Vec<Option<f64>> {
    (0..d)
        .map(|j| {
            let col: Vec<f64> = x.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
            (!col.is_empty()).then(|| stats::median(&col))
        })
        .collect()
}

fn impute(x: &[Vec<f64>], medians: &[Option<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|r| r.iter().zip(medians).map(|(&v, m)| if v.is_nan() { m.unwrap_or(f64::NAN) } else { v }).collect())
        .collect()
}

pub fn fit(x: &[Vec<f64>], y: &[u8], params: &GbdtParams) -> Result<TrainedBaseModel, GbdtError> {
    fit_named(x, y, params, Vec::new())
}

/// Fit with feature names carried into the model.
pub fn fit_named(x: &[Vec<f64>], y: &[u8], params: &GbdtParams, feature_names: Vec<String>) -> Result<TrainedBaseModel, GbdtError> {
    params.validate()?;
    let n = x.len();
    if n != y.len() {
        return Err(GbdtError::LengthMismatch { rows: n, labels: y.len() });
    }
    if n < 2 {
        return Err(GbdtError::TooFewRows(n));
    }
    if let Some(&b) = y.iter().find(|&&v| v > 1) {
        return Err(GbdtError::BadLabel(b));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(GbdtError::DegenerateLabels);
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(GbdtError::DimensionMismatch { expected: d, found: r.len() });
    }
    if !feature_names.is_empty() && feature_names.len() != d {
        return Err(GbdtError::DimensionMismatch { expected: d, found: feature_names.len() });
    }

    let medians = if params.impute_missing { column_medians(x, d) } else { vec![None; d] };
    let xi = if params.impute_missing { impute(x, &medians) } else { x.to_vec() };

    // ln(pos/neg), written so that swapping classes negates it exactly
    let base_score = (pos as f64).ln() - ((n - pos) as f64).ln();
    let mut margin = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_sub = ((params.subsample * n as f64).round() as usize).clamp(2.min(n), n);
    let grow = tree::GrowParams {
        max_depth: params.max_depth,
        lambda: params.l2_leaf_reg,
        gamma: params.gamma,
        learning_rate: params.learning_rate,
    };
    let mut trees = Vec::new();
    for _ in 0..params.n_estimators {
        for i in 0..n {
            let (p, q) = (sigmoid(margin[i]), sigmoid(-margin[i]));
            let (w, g) = if y[i] == 1 { (params.scale_pos_weight, -q) } else { (1.0, p) };
            grad[i] = w * g;
            hess[i] = w * p * q;
        }
        let rows: Vec<usize> = if n_sub < n {
            let mut r = sample(&mut rng, n, n_sub).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let Some(t) = tree::grow(&xi, &grad, &hess, rows, &grow) else {
            continue;
        };
        for (m, row) in margin.iter_mut().zip(&xi) {
            *m += t.predict(row);
        }
        trees.push(t);
    }
    Ok(TrainedBaseModel {
        format_version: MODEL_FORMAT_VERSION,
        params: *params,
        base_score,
        n_features: d,
        feature_names,
        medians,
        trees,
    })
}

impl TrainedBaseModel {
    /// Tree-less model that predicts `log_odds` for every row.
    pub fn constant(n_features: usize, log_odds: f64, params: &GbdtParams) -> TrainedBaseModel {
        TrainedBaseModel {
            format_version: MODEL_FORMAT_VERSION,
            params: *params,
            base_score: log_odds,
            n_features,
            feature_names: Vec::new(),
            medians: vec![None; n_features],
            trees: Vec::new(),
        }
    }

    fn prepare(&self, row: &[f64]) -> Result<Vec<f64>, GbdtError> {
        if row.len() != self.n_features {
            return Err(GbdtError::DimensionMismatch { expected: self.n_features, found: row.len() });
        }
        Ok(row.iter().zip(&self.medians).map(|(&v, m)| if v.is_nan() { m.unwrap_or(f64::NAN) } else { v }).collect())
    }

    /// Log-odds using only the first `k` trees.
    pub fn predict_log_odds_staged(&self, x: &[Vec<f64>], k: usize) -> Result<Vec<f64>, GbdtError> {
        x.iter()
            .map(|r| {
                let r = self.prepare(r)?;
                Ok(self.base_score + self.trees.iter().take(k).map(|t| t.predict(&r)).sum::<f64>())
            })
            .collect()
    }

    pub fn predict_log_odds(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, GbdtError> {
        self.predict_log_odds_staged(x, self.trees.len())
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, GbdtError> {
        Ok(self.predict_log_odds(x)?.into_iter().map(sigmoid).collect())
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<TrainedBaseModel, GbdtError> {
        let m: TrainedBaseModel = serde_json::from_str(s).map_err(|e| GbdtError::Serialization(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(GbdtError::Serialization(format!("unsupported model format {}", m.format_version)));
        }
        Ok(m)
    }
}

/// Convenience wrapper: free-function form of [`TrainedBaseModel::predict_log_odds`].
pub fn predict_log_odds(model: &TrainedBaseModel, x: &[Vec<f64>]) -> Result<Vec<f64>, GbdtError> {
    model.predict_log_odds(x)
}
