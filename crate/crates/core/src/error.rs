use thiserror::Error;

use crate::dsp::DspError;
use crate::evaluation::EvalError;
use crate::features::FeatureError;
use crate::gbdt::GbdtError;
use crate::hvresponse::HvError;
use crate::ingest::IngestError;
use crate::preprocess::PreprocessError;
use crate::stacking::StackError;

/// Crate-level error wrapping each stage's own error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    Stacking(#[from] StackError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Hv(#[from] HvError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
