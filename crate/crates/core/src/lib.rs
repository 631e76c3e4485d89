//! Stage-stratified five-year cancer survivability modeling on SEER-shaped
//! tabular cohorts.
//!
//! The crate covers the full workflow: CSV ingest with cleaning and survival
//! labeling, stage splitting, one-hot encoding with z-score normalization,
//! four from-scratch classifiers (logistic regression, random forest,
//! AdaBoost, symmetric-tree gradient boosting) under class weighting,
//! stratified cross-validation with grid search selected on ROC-AUC, global
//! Shapley attributions and local linear surrogates, survivor statistics,
//! and a deterministic end-to-end pipeline with a synthetic cohort generator
//! for verification.

pub mod attribution;
pub mod encode;
pub mod error;
pub mod ingest;
pub mod learners;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod schema;
pub mod selection;
pub mod stats;
pub mod synth;

pub use encode::CohortTable;
pub use error::Error;
pub use ingest::{RawRecord, Stage, SurvivalLabel};
pub use learners::{ClassWeights, Learner, ModelConfig, TrainedModel};
pub use schema::{FeatureKind, FeatureSchema};

pub type Result<T> = std::result::Result<T, Error>;
