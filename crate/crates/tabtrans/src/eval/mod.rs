//! Confusion-matrix metrics, ROC/AUC, leakage-guarded cross-validation,
//! and hyperparameter search.

mod cv;
mod metrics;
mod tune;

pub use cv::{
    cross_validate, cv_accuracy_on_features, mean_entries, AccessLog, CvPipelineSpec, CvReport,
    FoldOutcome, RankingStage, StageAccess, TransformerStage,
};
pub use metrics::{
    confusion, f1_from_pr, metrics, roc_auc, ConfusionMatrix, MetricsEntry, RocCurve, RocPoint,
};
pub use tune::{tune, ParamDomain, SearchSpace, TrialRecord, TuneStrategy};
