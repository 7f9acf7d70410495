//! Tabular machine-learning pipeline built around transformer-based
//! contextual feature extraction for mixed categorical/numeric tables.
//!
//! The crate is organized as a set of layered modules:
//!
//! * [`data`] — CSV ingestion, schema typing, outlier filtering, scaling,
//!   encoding, stratified splitting, and SMOTE class balancing.
//! * [`stats`] — summary statistics and association tests (chi-square,
//!   Student's t, Wilcoxon rank-sum, omnibus normality screening).
//! * [`numerics`] — dense kernels with hand-written backward passes,
//!   the Adam optimizer, and the seeded PRNG used everywhere.
//! * [`tabtransformer`] — column embeddings, self-attention encoder,
//!   MLP head, end-to-end training, and contextual feature extraction.
//! * [`classical`] — in-house forests, boosting, linear models, and an
//!   MLP behind one probability-predicting contract, plus impurity
//!   feature ranking.
//! * [`eval`] — confusion-matrix metrics, ROC/AUC, leakage-guarded
//!   cross-validation, and hyperparameter search.
//! * [`nomogram`] — points-based logistic risk scoring, calibration
//!   curves, and decision-curve analysis.
//! * [`pipeline`] — orchestration of the full flow behind the CLI,
//!   with persisted models and CSV/JSON reports.

pub mod classical;
pub mod data;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod nomogram;
pub mod numerics;
pub mod persist;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod tabtransformer;

pub use error::{Error, Result};
