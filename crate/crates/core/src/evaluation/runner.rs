use std::collections::HashMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::stats;
use crate::features::{build_feature_matrix, FeatureConfig, FeatureMatrix};
use crate::gbdt::{self, scale_pos_weight_for_fold, GbdtParams, TrainedBaseModel};
use crate::ingest::SegmentKind;
use crate::preprocess::PreprocessedRecording;
use crate::stacking::{self, fit_stack, select_threshold_gmean, StackError, StackInputs};

use super::folds::{derive_seed, loso_folds};
use super::metrics::{
    clinically_relevant_line, compute_auc, compute_bac_at_sens, is_clinically_relevant, roc_curve, Confusion, RocPoint,
    CLINICAL_POSTERIOR, TARGET_SENSITIVITY,
};
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub gbdt: GbdtParams,
    pub seeds: Vec<u64>,
    /// stacking barrier coefficient
    pub alpha: f64,
    /// replace `gbdt.scale_pos_weight` by the neg/pos ratio of each training fold
    pub auto_scale_pos_weight: bool,
    /// use this seed for every repeat's inner split instead of the repeat seed
    pub fixed_split_seed: Option<u64>,
    pub clinical_posterior: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            gbdt: GbdtParams::default(),
            seeds: (0..5).collect(),
            alpha: stacking::DEFAULT_ALPHA,
            auto_scale_pos_weight: true,
            fixed_split_seed: None,
            clinical_posterior: CLINICAL_POSTERIOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStage {
    /// stage-1 model on all N-1 training subjects
    Single,
    /// ensemble base model on the inner-train subjects
    InnerTrain,
    /// ensemble base model refit on inner-train plus validation
    Refit,
}

/// Everything handed to one GBDT fit.
#[derive(Debug)]
pub struct FitContext<'a> {
    pub stage: FitStage,
    pub seed: u64,
    pub config_id: &'a str,
    pub test_subject: &'a str,
    pub subject_ids: &'a [String],
    pub rows: &'a [Vec<f64>],
}

/// Hook called before every model fit; used to audit what data reaches
/// training.
pub trait FitObserver: Sync {
    fn on_fit(&self, ctx: &FitContext<'_>);
}

pub struct NoObserver;

impl FitObserver for NoObserver {
    fn on_fit(&self, _: &FitContext<'_>) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectPrediction {
    pub subject_id: String,
    pub label: u8,
    pub log_odds: f64,
    pub probability: f64,
    pub decision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub test_subject: String,
    /// one per base model, as used for the final fit; `None` for a
    /// single-class training set
    pub scale_pos_weight: Vec<Option<f64>>,
    pub weights: Option<Vec<f64>>,
    pub threshold: Option<f64>,
    pub validation_gmean: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClinicalVerdict {
    pub slope: f64,
    pub p1: f64,
    pub p0: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub relevant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub seed: u64,
    pub predictions: Vec<SubjectPrediction>,
    pub folds: Vec<FoldRecord>,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    /// balanced accuracy with sensitivity pinned at 0.8 on the ROC
    pub bac_at_sens: f64,
    /// balanced accuracy of the hard decisions
    pub bac: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub gmean: f64,
    pub clinical: ClinicalVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// population standard deviation over repeats
    pub std: f64,
}

impl MeanStd {
    pub fn of(v: &[f64]) -> MeanStd {
        MeanStd { mean: stats::mean(v), std: stats::std_dev(v, 0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auc: MeanStd,
    pub bac_at_sens: MeanStd,
    pub bac: MeanStd,
    pub gmean: MeanStd,
    pub sensitivity: MeanStd,
    pub specificity: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub name: String,
    pub segment: SegmentKind,
    pub configs: Vec<FeatureConfig>,
    pub n_subjects: usize,
    pub repeats: Vec<RepeatResult>,
    pub summary: Summary,
}

impl EvaluationReport {
    pub fn is_ensemble(&self) -> bool {
        self.configs.len() > 1
    }
}

struct Data<'a> {
    ids: Vec<String>,
    y: Vec<u8>,
    /// per matrix, row index of each subject in `ids`
    rows: Vec<Vec<usize>>,
    mats: &'a [FeatureMatrix],
}

impl<'a> Data<'a> {
    fn align(mats: &'a [FeatureMatrix]) -> Result<Data<'a>, EvalError> {
        let first = mats.first().ok_or(EvalError::NoConfigs)?;
        if let Some(m) = mats.iter().find(|m| m.segment != first.segment) {
            return Err(EvalError::Metric(format!("segment mismatch: {} vs {}", m.segment.name(), first.segment.name())));
        }
        let maps: Vec<HashMap<&str, usize>> =
            mats.iter().map(|m| m.subject_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()).collect();
        let mut ids = Vec::new();
        let mut dropped = 0;
        for s in &first.subject_ids {
            if maps.iter().all(|m| m.contains_key(s.as_str())) {
                ids.push(s.clone());
            } else {
                dropped += 1;
            }
        }
        if dropped > 0 {
            warn!("{dropped} subjects lack features for some configuration and are left out");
        }
        let rows: Vec<Vec<usize>> = maps.iter().map(|m| ids.iter().map(|s| m[s.as_str()]).collect()).collect();
        let mut y = Vec::with_capacity(ids.len());
        for (j, s) in ids.iter().enumerate() {
            let mut label = None;
            for (m, r) in mats.iter().zip(&rows) {
                let l = m.labels[r[j]].ok_or_else(|| EvalError::MissingLabel(s.clone()))?.as_target();
                if label.is_some_and(|v| v != l) {
                    return Err(EvalError::Metric(format!("subject {s} has conflicting labels")));
                }
                label = Some(l);
            }
            y.push(label.expect("at least one matrix"));
        }
        if ids.len() < 3 {
            return Err(EvalError::TooFewSubjects(ids.len()));
        }
        if !y.contains(&0) || !y.contains(&1) {
            return Err(EvalError::SingleClass);
        }
        Ok(Data { ids, y, rows, mats })
    }

    fn x(&self, k: usize, j: usize) -> &Vec<f64> {
        &self.mats[k].x[self.rows[k][j]]
    }

    #[allow(clippy::too_many_arguments)]
    fn fit(
        &self,
        k: usize,
        subjects: &[usize],
        opts: &EvalOptions,
        seed: u64,
        stage: FitStage,
        test: usize,
        observer: &dyn FitObserver,
    ) -> Result<(TrainedBaseModel, Option<f64>), EvalError> {
        let rows: Vec<Vec<f64>> = subjects.iter().map(|&j| self.x(k, j).clone()).collect();
        let y: Vec<u8> = subjects.iter().map(|&j| self.y[j]).collect();
        let ids: Vec<String> = subjects.iter().map(|&j| self.ids[j].clone()).collect();
        let mut params = GbdtParams { seed, ..opts.gbdt };
        let pos = y.iter().filter(|&&v| v == 1).count();
        if pos == 0 || pos == y.len() {
            // add-one-half smoothed prior; only reachable in tiny cohorts
            let z = ((pos as f64 + 0.5) / ((y.len() - pos) as f64 + 0.5)).ln();
            warn!("single-class training set for test subject {}, predicting the prior {z:.3}", self.ids[test]);
            return Ok((TrainedBaseModel::constant(self.mats[k].n_features(), z, &params), None));
        }
        if opts.auto_scale_pos_weight {
            params.scale_pos_weight = scale_pos_weight_for_fold(&y)?;
        }
        let config_id = self.mats[k].config.id();
        observer.on_fit(&FitContext {
            stage,
            seed,
            config_id: &config_id,
            test_subject: &self.ids[test],
            subject_ids: &ids,
            rows: &rows,
        });
        let model = gbdt::fit_named(&rows, &y, &params, self.mats[k].feature_names.clone())?;
        Ok((model, Some(params.scale_pos_weight)))
    }

    fn log_odds(&self, model: &TrainedBaseModel, k: usize, subjects: &[usize]) -> Result<Vec<f64>, EvalError> {
        let rows: Vec<Vec<f64>> = subjects.iter().map(|&j| self.x(k, j).clone()).collect();
        Ok(model.predict_log_odds(&rows)?)
    }
}

fn summarize(
    data: &Data,
    seed: u64,
    log_odds: Vec<f64>,
    decisions: Vec<bool>,
    folds: Vec<FoldRecord>,
    opts: &EvalOptions,
) -> Result<RepeatResult, EvalError> {
    let y = &data.y;
    let predictions: Vec<SubjectPrediction> = data
        .ids
        .iter()
        .zip(y)
        .zip(log_odds.iter().zip(&decisions))
        .map(|((s, &label), (&z, &decision))| SubjectPrediction {
            subject_id: s.clone(),
            label,
            log_odds: z,
            probability: stacking::probability(z),
            decision,
        })
        .collect();
    let roc = roc_curve(&log_odds, y)?;
    let conf = Confusion::from_decisions(&decisions, y);
    let p1 = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
    let p0 = 1.0 - p1;
    let slope = clinically_relevant_line(opts.clinical_posterior, p1, p0)?;
    let (fpr, tpr) = (conf.fpr(), conf.sensitivity());
    Ok(RepeatResult {
        seed,
        predictions,
        folds,
        auc: compute_auc(&log_odds, y)?,
        bac_at_sens: compute_bac_at_sens(&roc, TARGET_SENSITIVITY)?,
        roc,
        bac: conf.bac(),
        sensitivity: conf.sensitivity(),
        specificity: conf.specificity(),
        gmean: conf.gmean(),
        clinical: ClinicalVerdict { slope, p1, p0, fpr, tpr, relevant: is_clinically_relevant(fpr, tpr, slope) },
    })
}

fn report(name: String, data: &Data, repeats: Vec<RepeatResult>) -> EvaluationReport {
    let col = |f: fn(&RepeatResult) -> f64| MeanStd::of(&repeats.iter().map(f).collect::<Vec<_>>());
    let summary = Summary {
        auc: col(|r| r.auc),
        bac_at_sens: col(|r| r.bac_at_sens),
        bac: col(|r| r.bac),
        gmean: col(|r| r.gmean),
        sensitivity: col(|r| r.sensitivity),
        specificity: col(|r| r.specificity),
    };
    EvaluationReport {
        name,
        segment: data.mats[0].segment,
        configs: data.mats.iter().map(|m| m.config).collect(),
        n_subjects: data.ids.len(),
        repeats,
        summary,
    }
}

/// Stage-1 LOSO for one feature configuration: every fold trains on all
/// remaining subjects; the hard decision is `p >= 0.5`.
pub fn run_single_config(matrix: &FeatureMatrix, opts: &EvalOptions, observer: &dyn FitObserver) -> Result<EvaluationReport, EvalError> {
    let mats = std::slice::from_ref(matrix);
    let data = Data::align(mats)?;
    let n = data.ids.len();
    let mut repeats = Vec::new();
    for &seed in &opts.seeds {
        let folds: Vec<(f64, FoldRecord)> = (0..n)
            .into_par_iter()
            .map(|t| {
                let train: Vec<usize> = (0..n).filter(|&j| j != t).collect();
                let fit_seed = derive_seed(&[seed, t as u64]);
                let (model, spw) = data.fit(0, &train, opts, fit_seed, FitStage::Single, t, observer)?;
                let z = data.log_odds(&model, 0, &[t])?[0];
                let rec = FoldRecord {
                    test_subject: data.ids[t].clone(),
                    scale_pos_weight: vec![spw],
                    weights: None,
                    threshold: None,
                    validation_gmean: None,
                };
                Ok((z, rec))
            })
            .collect::<Result<_, EvalError>>()?;
        let (z, recs): (Vec<f64>, Vec<FoldRecord>) = folds.into_iter().unzip();
        let decisions = z.iter().map(|&v| stacking::probability(v) >= 0.5).collect();
        repeats.push(summarize(&data, seed, z, decisions, recs, opts)?);
    }
    Ok(report(matrix.config.id(), &data, repeats))
}

/// Build the matrix from preprocessed recordings, then run stage 1.
pub fn run_single_config_on_recordings(
    recordings: &[PreprocessedRecording],
    config: &FeatureConfig,
    segment: SegmentKind,
    opts: &EvalOptions,
) -> Result<EvaluationReport, EvalError> {
    let m = build_feature_matrix(recordings, config, segment)?;
    run_single_config(&m, opts, &NoObserver)
}

/// Stacked-ensemble LOSO over aligned matrices (one per configuration).
pub fn run_ensemble(matrices: &[FeatureMatrix], opts: &EvalOptions, observer: &dyn FitObserver) -> Result<EvaluationReport, EvalError> {
    let data = Data::align(matrices)?;
    let k_models = matrices.len();
    if k_models > stacking::MAX_BASE_MODELS {
        return Err(StackError::TooManyModels(k_models).into());
    }
    let index: HashMap<&str, usize> = data.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut repeats = Vec::new();
    for &seed in &opts.seeds {
        let plans = loso_folds(&data.ids, &data.y, opts.fixed_split_seed.unwrap_or(seed))?;
        let folds: Vec<(f64, bool, FoldRecord)> = plans
            .par_iter()
            .enumerate()
            .map(|(t, plan)| {
                let to_idx = |v: &[String]| v.iter().map(|s| index[s.as_str()]).collect::<Vec<usize>>();
                let (inner, valid, train) =
                    (to_idx(&plan.inner_train_subjects), to_idx(&plan.valid_subjects), to_idx(&plan.train_subjects));
                let mut p_valid = vec![Vec::with_capacity(k_models); valid.len()];
                for k in 0..k_models {
                    let fit_seed = derive_seed(&[seed, t as u64, k as u64, 0]);
                    let (m, _) = data.fit(k, &inner, opts, fit_seed, FitStage::InnerTrain, t, observer)?;
                    for (row, z) in p_valid.iter_mut().zip(data.log_odds(&m, k, &valid)?) {
                        row.push(z);
                    }
                }
                let y_valid: Vec<u8> = valid.iter().map(|&j| data.y[j]).collect();
                let (weights, threshold, vg) = if y_valid.contains(&0) && y_valid.contains(&1) {
                    let fit = fit_stack(&StackInputs { p: p_valid.clone(), y: y_valid.clone(), alpha: opts.alpha })?;
                    let probs: Vec<f64> = p_valid
                        .iter()
                        .map(|r| stacking::predict_stack(&fit.weights, r))
                        .collect::<Result<_, _>>()?;
                    let th = select_threshold_gmean(&probs, &y_valid)?;
                    (fit.weights, th.threshold, Some(th.gmean))
                } else {
                    warn!("fold {}: single-class validation set, using uniform weights and threshold 0.5", plan.test_subject);
                    (vec![1.0 / k_models as f64; k_models], 0.5, None)
                };
                let mut z_test = Vec::with_capacity(k_models);
                let mut spws = Vec::with_capacity(k_models);
                for k in 0..k_models {
                    let fit_seed = derive_seed(&[seed, t as u64, k as u64, 1]);
                    let (m, spw) = data.fit(k, &train, opts, fit_seed, FitStage::Refit, t, observer)?;
                    z_test.push(data.log_odds(&m, k, &[t])?[0]);
                    spws.push(spw);
                }
                let z = stacking::stacked_log_odds(&weights, &z_test)?;
                let decision = stacking::probability(z) >= threshold;
                let rec = FoldRecord {
                    test_subject: plan.test_subject.clone(),
                    scale_pos_weight: spws,
                    weights: Some(weights),
                    threshold: Some(threshold),
                    validation_gmean: vg,
                };
                Ok((z, decision, rec))
            })
            .collect::<Result<_, EvalError>>()?;
        let mut z = Vec::with_capacity(folds.len());
        let mut decisions = Vec::with_capacity(folds.len());
        let mut recs = Vec::with_capacity(folds.len());
        for (a, b, c) in folds {
            z.push(a);
            decisions.push(b);
            recs.push(c);
        }
        repeats.push(summarize(&data, seed, z, decisions, recs, opts)?);
    }
    let name = format!("ensemble[{}]", matrices.iter().map(|m| m.config.id()).collect::<Vec<_>>().join("+"));
    Ok(report(name, &data, repeats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedConfig {
    pub config: FeatureConfig,
    pub auc: f64,
    pub bac_at_sens: f64,
}

fn better(a: &RankedConfig, b: &RankedConfig) -> bool {
    (a.auc, a.bac_at_sens, std::cmp::Reverse(a.config.window_length_s))
        .partial_cmp(&(b.auc, b.bac_at_sens, std::cmp::Reverse(b.config.window_length_s)))
        .is_some_and(|o| o.is_gt())
}

/// Best single configuration per family by mean AUC (ties: higher BAC at
/// Sens 0.8, then shorter window), listed best family first.
pub fn rank_configs(reports: &[EvaluationReport]) -> Vec<RankedConfig> {
    let mut best: Vec<RankedConfig> = Vec::new();
    for r in reports.iter().filter(|r| r.configs.len() == 1) {
        let cand = RankedConfig { config: r.configs[0], auc: r.summary.auc.mean, bac_at_sens: r.summary.bac_at_sens.mean };
        match best.iter_mut().find(|b| b.config.family == cand.config.family) {
            Some(b) if better(&cand, b) => *b = cand,
            Some(_) => {}
            None => best.push(cand),
        }
    }
    let mut sorted: Vec<RankedConfig> = Vec::with_capacity(best.len());
    for c in best {
        let pos = sorted.iter().position(|s| better(&c, s)).unwrap_or(sorted.len());
        sorted.insert(pos, c);
    }
    sorted
}

/// Ensembles formed by adding families in rank order, one per size.
pub fn ensemble_enrollment(ranked: &[RankedConfig], sizes: &[usize]) -> Vec<Vec<FeatureConfig>> {
    sizes
        .iter()
        .filter(|&&k| (2..=stacking::MAX_BASE_MODELS).contains(&k) && k <= ranked.len())
        .map(|&k| ranked[..k].iter().map(|r| r.config).collect())
        .collect()
}

/// Every size-`k` subset of the ranked configurations, in lexicographic order.
pub fn exhaustive_enrollment(ranked: &[RankedConfig], k: usize) -> Vec<Vec<FeatureConfig>> {
    fn rec(start: usize, k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, k, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k >= 1 && k <= ranked.len() {
        rec(0, k, ranked.len(), &mut Vec::new(), &mut out);
    }
    out.into_iter().map(|v| v.into_iter().map(|i| ranked[i].config).collect()).collect()
}
