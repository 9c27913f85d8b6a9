//! Signal-processing primitives shared by the preprocessing and feature stages.

pub mod eigen;
pub mod filter;
pub mod resample;
pub mod spectrum;
pub mod stats;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
