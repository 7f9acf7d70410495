use serde::{Deserialize, Serialize};

use super::metrics::{confusion, metrics, roc_auc, ConfusionMatrix, MetricsEntry};
use crate::classical::{
    feature_importance, fit_forest, select_top, ClassifierSpec, ForestParams,
};
use crate::data::{
    encode, smote, standard_scale_fit, stratified_assignments, Dataset, EncodeMode, FoldPlan,
    SmoteConfig,
};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Matrix};
use crate::tabtransformer::{train, TabTransformerModel, TrainConfig};

/// Feature ranking stage: forest hyperparameters plus how many of the
/// ranked features survive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingStage {
    pub forest: ForestParams,
    pub top_n: usize,
}

/// Where the contextual features come from during cross-validation.
#[derive(Debug, Clone)]
pub enum TransformerStage {
    /// Refit the transformer inside every fold (no leakage).
    PerFold(TrainConfig),
    /// Reuse one already-fitted model (the reproduction escape hatch:
    /// fitted once on the training split before the folds were cut).
    Fixed(Box<TabTransformerModel>),
}

/// Full per-fold pipeline: scale, contextual features, ranking, SMOTE,
/// classifier. Optional stages switch off cleanly.
#[derive(Debug, Clone)]
pub struct CvPipelineSpec {
    /// Fit a standard scaler on the fold's training rows. Leave off when
    /// the dataset is already scaled (fixed-transformer mode).
    pub scale: bool,
    pub transformer: Option<TransformerStage>,
    pub smote: Option<SmoteConfig>,
    pub ranking: Option<RankingStage>,
    pub classifier: ClassifierSpec,
}

/// One stage's training-data access, recorded as original-file row ids.
/// The leakage audit checks these sets against the held-out rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageAccess {
    pub stage: String,
    pub fold: u32,
    pub fit_rows: Vec<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AccessLog {
    pub accesses: Vec<StageAccess>,
}

impl AccessLog {
    fn record(&mut self, stage: &str, fold: u32, ds: &Dataset) {
        let mut rows = ds.provenance.clone();
        rows.sort_unstable();
        self.accesses.push(StageAccess { stage: stage.to_string(), fold, fit_rows: rows });
    }

    /// Returns a description of every fit access that touched a row
    /// outside its permitted training partition. Empty means no leakage.
    pub fn violations(&self, ds: &Dataset, plan: &FoldPlan, holdout: &[bool]) -> Vec<String> {
        let mut out = Vec::new();
        for access in &self.accesses {
            let mut forbidden: Vec<usize> = plan
                .fold_rows(access.fold)
                .into_iter()
                .map(|r| ds.provenance[r])
                .collect();
            forbidden.extend(
                holdout
                    .iter()
                    .enumerate()
                    .filter(|(_, &h)| h)
                    .map(|(r, _)| ds.provenance[r]),
            );
            forbidden.sort_unstable();
            for row in &access.fit_rows {
                if forbidden.binary_search(row).is_ok() {
                    out.push(format!(
                        "stage '{}' fold {} fitted on forbidden row {row}",
                        access.stage, access.fold
                    ));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: u32,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsEntry,
    /// Accuracy of the transformer's own classification head on this
    /// fold's held-out rows, when a transformer stage ran.
    pub transformer_head_accuracy: Option<f64>,
    /// The fold's selected feature indices (post-ranking), for reports.
    pub selected_features: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldOutcome>,
    /// Plain average of the per-fold metrics.
    pub mean: MetricsEntry,
    /// Metrics of the pooled confusion counts across folds.
    pub pooled: MetricsEntry,
    pub access_log: AccessLog,
}

/// Plain average of metric entries (fold-mean convention).
pub fn mean_entries(entries: &[&MetricsEntry]) -> MetricsEntry {
    let n = entries.len() as f64;
    let avg = |f: &dyn Fn(&MetricsEntry) -> f64| entries.iter().map(|e| f(e)).sum::<f64>() / n;
    let aucs: Vec<f64> = entries.iter().filter_map(|e| e.auc).collect();
    MetricsEntry {
        accuracy: avg(&|e| e.accuracy),
        precision: avg(&|e| e.precision),
        recall: avg(&|e| e.recall),
        specificity: avg(&|e| e.specificity),
        f1: avg(&|e| e.f1),
        auc: (aucs.len() == entries.len())
            .then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        degenerate: Vec::new(),
    }
}

/// Runs the full chain per fold, fitting every component on the fold's
/// training rows only, and evaluates on the held-out fold. Every fit is
/// recorded in the access log for the leakage audit.
pub fn cross_validate(spec: &CvPipelineSpec, ds: &Dataset, plan: &FoldPlan) -> Result<CvReport> {
    if plan.assignments.len() != ds.n_rows() {
        return Err(Error::Config("cross_validate: plan does not match dataset".into()));
    }
    let mut log = AccessLog::default();
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k as u32 {
        let outcome = run_fold(spec, ds, plan, fold, &mut log)
            .map_err(|e| Error::Data(format!("fold {fold}: {e}")))?;
        folds.push(outcome);
    }
    let mean = mean_entries(&folds.iter().map(|f| &f.metrics).collect::<Vec<_>>());
    let mut pooled_cm = ConfusionMatrix::default();
    for f in &folds {
        pooled_cm.add(&f.confusion);
    }
    let pooled = metrics(&pooled_cm)?;
    Ok(CvReport { folds, mean, pooled, access_log: log })
}

fn run_fold(
    spec: &CvPipelineSpec,
    ds: &Dataset,
    plan: &FoldPlan,
    fold: u32,
    log: &mut AccessLog,
) -> Result<FoldOutcome> {
    let train_rows = plan.training_rows(fold);
    let test_rows = plan.fold_rows(fold);
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::Data("empty fold".into()));
    }
    let mut train_ds = ds.subset(&train_rows);
    let mut test_ds = ds.subset(&test_rows);

    if spec.scale {
        log.record("scaler", fold, &train_ds);
        let scaler = standard_scale_fit(&train_ds)?;
        train_ds = scaler.apply(&train_ds)?;
        test_ds = scaler.apply(&test_ds)?;
    }

    // contextual features (or raw one-hot when no transformer is used)
    let (train_x, test_x, head_accuracy) = match &spec.transformer {
        Some(TransformerStage::PerFold(config)) => {
            log.record("transformer", fold, &train_ds);
            let mut config = config.clone();
            config.seed = derive_seed(config.seed, 1000 + fold as u64);
            let mut model = TabTransformerModel::for_dataset(config, &train_ds)?;
            train(&mut model, &train_ds, None)?;
            let acc = head_accuracy(&model, &test_ds)?;
            (
                model.extract_features(&train_ds)?,
                model.extract_features(&test_ds)?,
                Some(acc),
            )
        }
        Some(TransformerStage::Fixed(model)) => {
            let acc = head_accuracy(model, &test_ds)?;
            (
                model.extract_features(&train_ds)?,
                model.extract_features(&test_ds)?,
                Some(acc),
            )
        }
        None => (
            encode(&train_ds, EncodeMode::OneHot).matrix,
            encode(&test_ds, EncodeMode::OneHot).matrix,
            None,
        ),
    };

    // impurity ranking fitted on training features only
    let (train_x, test_x, selected) = match &spec.ranking {
        Some(stage) => {
            log.record("ranking", fold, &train_ds);
            let mut params = stage.forest.clone();
            params.seed = derive_seed(params.seed, 2000 + fold as u64);
            let forest = fit_forest(&train_x, &train_ds.labels, &params)?;
            let ranked = feature_importance(&forest);
            let top_n = stage.top_n.min(train_x.cols());
            let selected = ranked.top_indices(top_n);
            (
                select_top(&ranked, top_n, &train_x)?,
                select_top(&ranked, top_n, &test_x)?,
                Some(selected),
            )
        }
        None => (train_x, test_x, None),
    };

    // SMOTE balances the training features only
    let (train_x, train_y) = match &spec.smote {
        Some(cfg) => {
            log.record("smote", fold, &train_ds);
            let mut cfg = cfg.clone();
            cfg.seed = derive_seed(cfg.seed, 3000 + fold as u64);
            let balanced = smote(&train_x, &train_ds.labels, &cfg)?;
            (balanced.features, balanced.labels)
        }
        None => (train_x, train_ds.labels.clone()),
    };

    log.record("classifier", fold, &train_ds);
    let mut clf_spec = spec.classifier.clone();
    clf_spec.seed = derive_seed(clf_spec.seed, 4000 + fold as u64);
    let model = clf_spec.fit(&train_x, &train_y)?;

    let scores = model.scores(&test_x);
    let predictions: Vec<u8> = scores.iter().map(|&s| (s > 0.5) as u8).collect();
    let cm = confusion(&test_ds.labels, &predictions)?;
    let mut entry = metrics(&cm)?;
    entry.auc = Some(roc_auc(&scores, &test_ds.labels)?.auc);

    Ok(FoldOutcome {
        fold,
        confusion: cm,
        metrics: entry,
        transformer_head_accuracy: head_accuracy,
        selected_features: selected,
    })
}

fn head_accuracy(model: &TabTransformerModel, test_ds: &Dataset) -> Result<f64> {
    let probs = model.predict_proba(test_ds)?;
    let correct = (0..test_ds.n_rows())
        .filter(|&r| (probs.get(r, 1) > 0.5) as u8 == test_ds.labels[r])
        .count();
    Ok(correct as f64 / test_ds.n_rows() as f64)
}

/// Mean cross-validated accuracy of a classifier on a plain feature
/// matrix (per-fold SMOTE when configured). The tuning objective.
pub fn cv_accuracy_on_features(
    x: &Matrix,
    y: &[u8],
    k: usize,
    seed: u64,
    smote_cfg: Option<&SmoteConfig>,
    classifier: &ClassifierSpec,
) -> Result<f64> {
    let (assignments, _) = stratified_assignments(y, k, 0.0, seed)?;
    let mut total_correct = 0usize;
    let mut total = 0usize;
    for fold in 0..k as u32 {
        let train_rows: Vec<usize> = (0..y.len())
            .filter(|&r| assignments[r].is_some() && assignments[r] != Some(fold))
            .collect();
        let test_rows: Vec<usize> =
            (0..y.len()).filter(|&r| assignments[r] == Some(fold)).collect();
        let train_x = x.select_rows(&train_rows);
        let train_y: Vec<u8> = train_rows.iter().map(|&r| y[r]).collect();
        let (train_x, train_y) = match smote_cfg {
            Some(cfg) => {
                let mut cfg = cfg.clone();
                cfg.seed = derive_seed(cfg.seed, 3000 + fold as u64);
                let balanced = smote(&train_x, &train_y, &cfg)?;
                (balanced.features, balanced.labels)
            }
            None => (train_x, train_y),
        };
        let mut spec = classifier.clone();
        spec.seed = derive_seed(spec.seed, 4000 + fold as u64);
        let model = spec.fit(&train_x, &train_y)?;
        let test_x = x.select_rows(&test_rows);
        let predictions = model.predict_labels(&test_x);
        total_correct += test_rows
            .iter()
            .zip(&predictions)
            .filter(|(&r, &p)| y[r] == p)
            .count();
        total += test_rows.len();
    }
    Ok(total_correct as f64 / total as f64)
}
