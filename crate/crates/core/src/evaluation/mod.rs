//! Leave-one-subject-out evaluation of single configurations and stacked
//! ensembles, with ROC-based metrics.

mod folds;
mod metrics;
mod report;
mod runner;

use thiserror::Error;

use crate::features::FeatureError;
use crate::gbdt::GbdtError;
use crate::stacking::StackError;

pub use folds::{derive_seed, loso_folds, FoldPlan, VALID_FRACTION};
pub use metrics::{
    clinically_relevant_line, compute_auc, compute_bac_at_sens, fpr_at_sensitivity, is_clinically_relevant, roc_curve,
    Confusion, RocPoint, CLINICAL_POSTERIOR, TARGET_SENSITIVITY,
};
pub use report::{predictions_csv, roc_csv, roc_svg, summary_csv};
pub use runner::{
    ensemble_enrollment, exhaustive_enrollment, rank_configs, run_ensemble, run_single_config,
    run_single_config_on_recordings, ClinicalVerdict, EvalOptions, EvaluationReport, FitContext, FitObserver, FitStage,
    FoldRecord, MeanStd, NoObserver, RankedConfig, RepeatResult, SubjectPrediction, Summary,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 3 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("both classes must be present")]
    SingleClass,
    #[error("{subjects} subjects but {labels} labels")]
    LengthMismatch { subjects: usize, labels: usize },
    #[error("duplicate subject id {0}")]
    DuplicateSubject(String),
    #[error("no two-class inner split for test subject {test_subject} after {tries} draws")]
    InnerSplit { test_subject: String, tries: usize },
    #[error("subject {0} has no label")]
    MissingLabel(String),
    #[error("no feature configurations given")]
    NoConfigs,
    #[error("class priors p1={p1}, p0={p0} must lie in (0,1) and sum to 1")]
    InvalidPrevalence { p1: f64, p0: f64 },
    #[error("metric: {0}")]
    Metric(String),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    Stack(#[from] StackError),
    #[error(transparent)]
    Features(#[from] FeatureError),
}
