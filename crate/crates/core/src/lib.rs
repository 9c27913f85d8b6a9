//! Classification pipeline for routine EEG recorded under stimulation
//! procedures (intermittent photic stimulation and hyperventilation).
//!
//! ```text
//! EDF ─ ingest ─ preprocess ─ features ─┬─ gbdt (one model per feature config)
//!                                       └─ stacking (simplex-weighted log-odds)
//!                         evaluation: leave-one-subject-out, AUC / BAC / GMean
//!                         hvresponse: HV slowing index and responder split
//! ```
//!
//! `synth` generates labeled cohorts with controllable effects and is used
//! as the test oracle for the downstream stages.

pub mod dsp;
pub mod evaluation;
pub mod features;
pub mod gbdt;
pub mod hvresponse;
pub mod ingest;
pub mod preprocess;
pub mod seed;
pub mod stacking;
pub mod synth;

mod error;

pub use error::{Error, Result};
