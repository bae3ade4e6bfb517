//! Forecasting patient-reported symptom levels (ESAS pain and tiredness, 0–10)
//! from clinical variables and the previous survey.
//!
//! The pipeline: ingest surveys and build visit-to-visit transitions
//! ([`domain`]), balance classes with SMOTE-NC ([`sampling`]), train a leaf-wise
//! multiclass GBDT ([`gbdt`]), compare against naive baselines ([`baselines`])
//! with inverse-frequency weighted MAE ([`metrics`]), and explain predictions
//! with TreeSHAP ([`explain`]). [`harness`] runs the cross-validated protocol
//! end to end and [`synthgen`] produces synthetic cohorts to run it on.

pub mod baselines;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod explain;
pub mod gbdt;
pub mod harness;
pub mod metrics;
pub mod sampling;
pub mod synthgen;

pub use error::{Error, Result};

/// Symptom levels 0..=10.
pub const NUM_CLASSES: usize = 11;
