//! End-to-end orchestration: configuration, the staged pipeline run
//! (stats, filtering, splitting, scaling, transformer training, feature
//! extraction, ranking, SMOTE, classifier leaderboard, tuning, final
//! cross-validated report, nomogram), persistence, and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{
    default_roster, feature_importance, fit_forest, select_top, ClassifierKind, ClassifierSpec,
    ForestParams, ParamValue, TrainedClassifier,
};
use crate::data::{
    fnv1a64, heart_schema, load_csv, smote, standard_scale_fit, stratified_split, Dataset,
    FoldPlan, Schema, ScalerParams, SmoteConfig,
};
use crate::error::{Error, Result};
use crate::eval::{
    confusion, cross_validate, cv_accuracy_on_features, metrics, roc_auc, tune, CvPipelineSpec,
    CvReport, ParamDomain, RankingStage, SearchSpace, TransformerStage, TuneStrategy,
};
use crate::nomogram::{calibration_curve, decision_curve, fit_nomogram, NomogramSpec};
use crate::numerics::{derive_seed, streams, Matrix};
use crate::persist::{load_model, save_model};
use crate::report::{self, LeaderboardEntry};
use crate::tabtransformer::{train, TabTransformerModel, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Refit the entire chain inside every fold of the final report.
    #[default]
    Strict,
    /// Fit the transformer (and scaler) once on the training split and
    /// reuse them across the folds, mirroring the original experimental
    /// setup at the cost of cross-fold reuse.
    Paper,
}

fn default_tau() -> f64 {
    3.0
}
fn default_top_n() -> usize {
    10
}
fn default_folds() -> usize {
    5
}
fn default_holdout() -> f64 {
    0.2
}
fn default_trials() -> usize {
    100
}
fn default_true() -> bool {
    true
}
fn default_ranking_estimators() -> usize {
    100
}
fn default_ranking_depth() -> usize {
    12
}
fn default_calibration_bins() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Input CSV path.
    pub data: PathBuf,
    /// Schema override; the built-in heart-disease schema when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<Schema>,
    /// Z-score outlier threshold.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Numeric column names to filter; all numeric columns when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zscore_columns: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub scale: bool,
    #[serde(default = "default_true")]
    pub smote: bool,
    #[serde(default)]
    pub smote_k_neighbors: Option<usize>,
    #[serde(default)]
    pub transformer: TrainConfig,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default = "default_ranking_estimators")]
    pub ranking_n_estimators: usize,
    #[serde(default = "default_ranking_depth")]
    pub ranking_max_depth: usize,
    /// Classifier roster; the ten-model default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roster: Option<Vec<ClassifierSpec>>,
    #[serde(default = "default_trials")]
    pub tune_trials: usize,
    #[serde(default)]
    pub tune_strategy: TuneStrategy,
    /// Classifier kind to tune; the leaderboard winner when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_kind: Option<ClassifierKind>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    /// Master seed; every stage derives its own stream from it.
    #[serde(default)]
    pub seed: u64,
    /// Use the schema's weight column as transformer sample weights.
    #[serde(default)]
    pub use_weight_column: bool,
    /// Manual nomogram exclusions (indices into the selected features).
    #[serde(default)]
    pub nomogram_exclusions: Vec<usize>,
    #[serde(default = "default_calibration_bins")]
    pub calibration_bins: usize,
    #[serde(default)]
    pub mode: PipelineMode,
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config '{}': {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(Error::Config("tau must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config("holdout_fraction must be in [0, 1)".into()));
        }
        if self.top_n == 0 {
            return Err(Error::Config("top_n must be positive".into()));
        }
        if self.tune_trials == 0 {
            return Err(Error::Config("tune_trials must be positive".into()));
        }
        self.transformer.validate()?;
        if let Some(roster) = &self.roster {
            for spec in roster {
                spec.validate()?;
            }
        }
        if let Some(schema) = &self.schema {
            schema.validate()?;
        }
        Ok(())
    }

    pub fn effective_schema(&self) -> Schema {
        self.schema.clone().unwrap_or_else(heart_schema)
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
    pub rows_in: usize,
    pub rows_out: usize,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub software_version: String,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<String>,
    /// Set when the run aborted; names the failed stage.
    pub error: Option<String>,
}

struct StageTracker {
    manifest: RunManifest,
    current: Option<(String, Instant, usize)>,
}

impl StageTracker {
    fn new(config_hash: String) -> Self {
        StageTracker {
            manifest: RunManifest {
                config_hash,
                software_version: env!("CARGO_PKG_VERSION").to_string(),
                stages: Vec::new(),
                artifacts: Vec::new(),
                error: None,
            },
            current: None,
        }
    }

    fn begin(&mut self, stage: &str, rows_in: usize) {
        self.current = Some((stage.to_string(), Instant::now(), rows_in));
    }

    fn finish(&mut self, rows_out: usize, note: impl Into<String>) {
        if let Some((stage, start, rows_in)) = self.current.take() {
            self.manifest.stages.push(StageRecord {
                stage,
                seconds: start.elapsed().as_secs_f64(),
                rows_in,
                rows_out,
                note: note.into(),
            });
        }
    }

    fn artifact(&mut self, name: impl Into<String>) {
        self.manifest.artifacts.push(name.into());
    }
}

/// How far a staged invocation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageLimit {
    TransformerOnly,
    Full,
}

/// Everything the later stages (and the `predict` subcommand) need from
/// the front of the pipeline.
pub struct PipelineState {
    pub config: PipelineConfig,
    pub filtered: Dataset,
    pub plan: FoldPlan,
    pub holdout_mask: Vec<bool>,
    pub scaler: ScalerParams,
    pub transformer: TabTransformerModel,
    pub train_rows: Vec<usize>,
    pub holdout_rows: Vec<usize>,
    pub scaled_all: Dataset,
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    run_pipeline_until(config, StageLimit::Full)
}

/// Runs the staged pipeline, writing artifacts under the output
/// directory. The manifest is written even when a stage fails, with the
/// failure recorded.
pub fn run_pipeline_until(config: &PipelineConfig, limit: StageLimit) -> Result<RunManifest> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    let mut tracker = StageTracker::new(config.hash());

    // archive the effective config verbatim
    std::fs::write(
        config.output_dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;
    tracker.artifact("config.json");

    let result = run_stages(config, limit, &mut tracker);
    if let Err(e) = &result {
        let stage = tracker
            .current
            .take()
            .map(|(s, _, _)| s)
            .unwrap_or_else(|| "unknown".to_string());
        tracker.manifest.error = Some(format!("stage '{stage}' failed: {e}"));
    }
    report::write_json(&config.output_dir.join("run_manifest.json"), &tracker.manifest)?;
    result.map(|_| tracker.manifest)
}

fn run_stages(
    config: &PipelineConfig,
    limit: StageLimit,
    tracker: &mut StageTracker,
) -> Result<()> {
    let state = run_front_stages(config, tracker)?;
    if limit == StageLimit::TransformerOnly {
        return Ok(());
    }
    run_back_stages(config, &state, tracker)
}

fn run_front_stages(config: &PipelineConfig, tracker: &mut StageTracker) -> Result<PipelineState> {
    let dir = &config.output_dir;
    let schema = config.effective_schema();

    tracker.begin("load", 0);
    let loaded = load_csv(&config.data, &schema)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let dataset = loaded.dataset;
    tracker.finish(dataset.n_rows(), format!("{} warnings", loaded.warnings.len()));

    tracker.begin("stats", dataset.n_rows());
    let stats_rows = crate::stats::association_table(&dataset)?;
    for name in report::write_stats_report(dir, &stats_rows)? {
        tracker.artifact(name);
    }
    tracker.finish(dataset.n_rows(), format!("{} features tested", stats_rows.len()));

    tracker.begin("filter", dataset.n_rows());
    let zscore_cols = match &config.zscore_columns {
        None => None,
        Some(names) => {
            let numeric: Vec<String> = dataset
                .schema
                .numeric_columns()
                .iter()
                .map(|c| c.name.clone())
                .collect();
            let mut idx = Vec::new();
            for name in names {
                let found = numeric.iter().position(|n| n == name).ok_or_else(|| {
                    Error::Config(format!("zscore column '{name}' is not a numeric column"))
                })?;
                idx.push(found);
            }
            Some(idx)
        }
    };
    let (filtered, removal) =
        crate::data::zscore_filter(&dataset, config.tau, zscore_cols.as_deref())?;
    report::write_json(&dir.join("removal_report.json"), &removal)?;
    tracker.artifact("removal_report.json");
    tracker.finish(filtered.n_rows(), format!("{} rows removed", removal.removed.len()));

    tracker.begin("split", filtered.n_rows());
    let split = stratified_split(
        &filtered,
        config.folds,
        config.holdout_fraction,
        derive_seed(config.seed, streams::SPLIT),
    )?;
    report::write_json(&dir.join("fold_plan.json"), &split.plan)?;
    tracker.artifact("fold_plan.json");
    let train_rows = split.plan.non_holdout_rows();
    let holdout_rows: Vec<usize> = split
        .holdout
        .iter()
        .enumerate()
        .filter(|(_, &h)| h)
        .map(|(r, _)| r)
        .collect();
    tracker.finish(
        filtered.n_rows(),
        format!("{} train / {} holdout", train_rows.len(), holdout_rows.len()),
    );

    tracker.begin("scale", train_rows.len());
    let train_ds = filtered.subset(&train_rows);
    let scaler = standard_scale_fit(&train_ds)?;
    let scaled_all = if config.scale {
        scaler.apply(&filtered)?
    } else {
        filtered.clone()
    };
    report::write_json(&dir.join("scaler.json"), &scaler)?;
    tracker.artifact("scaler.json");
    tracker.finish(train_rows.len(), "fitted on training split only");

    tracker.begin("transformer", train_rows.len());
    let mut transformer_config = config.transformer.clone();
    transformer_config.seed = derive_seed(config.seed, streams::TRANSFORMER_INIT);
    let scaled_train = scaled_all.subset(&train_rows);
    let weights: Option<Vec<f64>> = if config.use_weight_column {
        scaled_train.weights.clone()
    } else {
        None
    };
    let mut transformer = TabTransformerModel::for_dataset(transformer_config, &scaled_train)?;
    let train_report = train(&mut transformer, &scaled_train, weights.as_deref())?;
    report::write_loss_curve(&dir.join("loss_curve.csv"), &train_report.loss_curve)?;
    tracker.artifact("loss_curve.csv");
    save_model(
        &dir.join("transformer_model.json"),
        "transformer",
        &transformer.schema_fingerprint.clone(),
        &transformer,
    )?;
    tracker.artifact("transformer_model.json");
    let first = train_report.loss_curve.first().copied().unwrap_or(0.0);
    let last = train_report.loss_curve.last().copied().unwrap_or(0.0);
    tracker.finish(train_rows.len(), format!("loss {first:.4} -> {last:.4}"));

    Ok(PipelineState {
        config: config.clone(),
        filtered,
        plan: split.plan,
        holdout_mask: split.holdout,
        scaler,
        transformer,
        train_rows,
        holdout_rows,
        scaled_all,
    })
}

fn run_back_stages(
    config: &PipelineConfig,
    state: &PipelineState,
    tracker: &mut StageTracker,
) -> Result<()> {
    let dir = &config.output_dir;
    let scaled_train = state.scaled_all.subset(&state.train_rows);
    let scaled_holdout = state.scaled_all.subset(&state.holdout_rows);

    tracker.begin("extract", scaled_train.n_rows());
    let train_features = state.transformer.extract_features(&scaled_train)?;
    let holdout_features = state.transformer.extract_features(&scaled_holdout)?;
    let feature_names = state.transformer.feature_names();
    report::write_features_csv(
        &dir.join("features_train.csv"),
        &train_features,
        &feature_names,
        &scaled_train.labels,
    )?;
    tracker.artifact("features_train.csv");
    report::write_features_csv(
        &dir.join("features_holdout.csv"),
        &holdout_features,
        &feature_names,
        &scaled_holdout.labels,
    )?;
    tracker.artifact("features_holdout.csv");
    tracker.finish(
        scaled_train.n_rows() + scaled_holdout.n_rows(),
        format!("width {}", train_features.cols()),
    );

    tracker.begin("rank", train_features.rows());
    let ranking_params = ForestParams::random_forest(
        config.ranking_n_estimators,
        config.ranking_max_depth,
        derive_seed(config.seed, streams::FOREST),
    );
    let ranking_forest = fit_forest(&train_features, &scaled_train.labels, &ranking_params)?;
    let ranked = feature_importance(&ranking_forest);
    let top_n = config.top_n.min(train_features.cols());
    report::write_ranking(&dir.join("ranking.csv"), &ranked, &feature_names, top_n)?;
    tracker.artifact("ranking.csv");
    let selected_idx = ranked.top_indices(top_n);
    let selected_names: Vec<String> =
        selected_idx.iter().map(|&i| feature_names[i].clone()).collect();
    report::write_json(
        &dir.join("selected_features.json"),
        &serde_json::json!({ "indices": selected_idx, "names": selected_names }),
    )?;
    tracker.artifact("selected_features.json");
    let train_selected = select_top(&ranked, top_n, &train_features)?;
    let holdout_selected = select_top(&ranked, top_n, &holdout_features)?;
    tracker.finish(train_features.rows(), format!("top {top_n} of {}", train_features.cols()));

    tracker.begin("smote", train_selected.rows());
    let smote_config = SmoteConfig {
        k_neighbors: config.smote_k_neighbors.unwrap_or(5),
        seed: derive_seed(config.seed, streams::SMOTE),
    };
    let (balanced_x, balanced_y, smote_note) = if config.smote {
        let out = smote(&train_selected, &scaled_train.labels, &smote_config)?;
        for w in &out.warnings {
            eprintln!("warning: {w}");
        }
        let note = format!("{} synthetic rows", out.synthetic_count);
        report::write_json(
            &dir.join("smote_report.json"),
            &serde_json::json!({
                "synthetic_count": out.synthetic_count,
                "positive": out.labels.iter().filter(|&&l| l == 1).count(),
                "negative": out.labels.iter().filter(|&&l| l == 0).count(),
            }),
        )?;
        tracker.artifact("smote_report.json");
        (out.features, out.labels, note)
    } else {
        (train_selected.clone(), scaled_train.labels.clone(), "disabled".to_string())
    };
    tracker.finish(balanced_x.rows(), smote_note);

    tracker.begin("leaderboard", balanced_x.rows());
    let roster = config
        .roster
        .clone()
        .unwrap_or_else(|| default_roster(derive_seed(config.seed, streams::BOOST)));
    let mut entries = Vec::new();
    for spec in &roster {
        let model = spec.fit(&balanced_x, &balanced_y)?;
        let scores = model.scores(&holdout_selected);
        let predictions: Vec<u8> = scores.iter().map(|&s| (s > 0.5) as u8).collect();
        let cm = confusion(&scaled_holdout.labels, &predictions)?;
        let mut entry = metrics(&cm)?;
        entry.auc = Some(roc_auc(&scores, &scaled_holdout.labels)?.auc);
        entries.push(LeaderboardEntry { model: spec.kind.as_str().to_string(), metrics: entry });
    }
    for name in report::write_leaderboard(dir, &mut entries)? {
        tracker.artifact(name);
    }
    let best_kind = match config.tune_kind {
        Some(kind) => kind,
        None => ClassifierKind::parse(&entries[0].model)?,
    };
    tracker.finish(
        holdout_selected.rows(),
        format!("best: {}, tuning: {}", entries[0].model, best_kind.as_str()),
    );

    tracker.begin("tune", balanced_x.rows());
    let space = search_space_for(best_kind);
    let tune_seed = derive_seed(config.seed, streams::TUNE);
    let folds = config.folds;
    let smote_for_cv = config.smote.then_some(&smote_config);
    let mut objective = |params: &std::collections::BTreeMap<String, ParamValue>| {
        let spec = spec_from_params(best_kind, params, tune_seed);
        cv_accuracy_on_features(
            &train_selected,
            &scaled_train.labels,
            folds,
            derive_seed(tune_seed, 1),
            smote_for_cv,
            &spec,
        )
    };
    let (best_trial, history) = tune(
        &space,
        &mut objective,
        config.tune_trials,
        tune_seed,
        config.tune_strategy,
    )?;
    report::write_tuning_history(&dir.join("tuning_history.csv"), &history)?;
    tracker.artifact("tuning_history.csv");
    let tuned_spec = spec_from_params(best_kind, &best_trial.params, tune_seed);
    report::write_json(&dir.join("best_params.json"), &tuned_spec)?;
    tracker.artifact("best_params.json");
    tracker.finish(
        balanced_x.rows(),
        format!("{} trials, best objective {:.4}", history.len(), best_trial.objective),
    );

    tracker.begin("final_cv", state.train_rows.len());
    let cv_report = final_cv(config, state, &tuned_spec)?;
    for name in report::write_cv_report(dir, "cv_report", &cv_report)? {
        tracker.artifact(name);
    }
    let head_note = cv_report
        .folds
        .iter()
        .filter_map(|f| f.transformer_head_accuracy)
        .map(|a| format!("{a:.3}"))
        .collect::<Vec<_>>()
        .join("/");
    tracker.finish(
        state.train_rows.len(),
        format!("mean acc {:.4}, head acc {head_note}", cv_report.mean.accuracy),
    );

    tracker.begin("final_model", balanced_x.rows());
    let tuned_model = tuned_spec.fit(&balanced_x, &balanced_y)?;
    let feature_fingerprint = features_fingerprint(&selected_names);
    save_model(
        &dir.join("classifier_model.json"),
        "classifier",
        &feature_fingerprint,
        &tuned_model,
    )?;
    tracker.artifact("classifier_model.json");
    let holdout_scores = tuned_model.scores(&holdout_selected);
    let predictions: Vec<u8> = holdout_scores.iter().map(|&s| (s > 0.5) as u8).collect();
    let cm = confusion(&scaled_holdout.labels, &predictions)?;
    let mut holdout_metrics = metrics(&cm)?;
    let roc = roc_auc(&holdout_scores, &scaled_holdout.labels)?;
    holdout_metrics.auc = Some(roc.auc);
    report::write_json(&dir.join("holdout_metrics.json"), &holdout_metrics)?;
    tracker.artifact("holdout_metrics.json");
    report::write_roc(&dir.join("roc.csv"), &roc)?;
    tracker.artifact("roc.csv");
    tracker.finish(holdout_selected.rows(), format!("holdout auc {:.4}", roc.auc));

    tracker.begin("nomogram", train_selected.rows());
    let nomo = fit_nomogram(
        &train_selected,
        &scaled_train.labels,
        &selected_names,
        &config.nomogram_exclusions,
    )?;
    for name in report::write_nomogram(dir, &nomo)? {
        tracker.artifact(name);
    }
    // calibration and decision curves over the holdout probabilities
    let holdout_probs: Vec<f64> = (0..holdout_selected.rows())
        .map(|r| nomo.probability_direct(&nomo.project_row(holdout_selected.row(r))))
        .collect();
    let bins = calibration_curve(&holdout_probs, &scaled_holdout.labels, config.calibration_bins)?;
    report::write_calibration(&dir.join("calibration.csv"), &bins)?;
    tracker.artifact("calibration.csv");
    let thresholds: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let dca = decision_curve(&holdout_probs, &scaled_holdout.labels, &thresholds)?;
    report::write_decision_curve(&dir.join("dca.csv"), &dca)?;
    tracker.artifact("dca.csv");
    tracker.finish(
        train_selected.rows(),
        format!("{} features, {} excluded", nomo.features.len(), nomo.excluded.len()),
    );
    Ok(())
}

fn final_cv(
    config: &PipelineConfig,
    state: &PipelineState,
    tuned_spec: &ClassifierSpec,
) -> Result<CvReport> {
    let smote_config = config.smote.then(|| SmoteConfig {
        k_neighbors: config.smote_k_neighbors.unwrap_or(5),
        seed: derive_seed(config.seed, streams::SMOTE),
    });
    let ranking = Some(RankingStage {
        forest: ForestParams::random_forest(
            config.ranking_n_estimators,
            config.ranking_max_depth,
            derive_seed(config.seed, streams::FOREST),
        ),
        top_n: config.top_n,
    });
    // the plan indexes the filtered dataset; restrict it to the
    // non-holdout rows for the fold report
    let cv_ds_rows = &state.train_rows;
    let assignments: Vec<Option<u32>> =
        cv_ds_rows.iter().map(|&r| state.plan.assignments[r]).collect();
    let plan = FoldPlan { k: state.plan.k, assignments, seed: state.plan.seed };

    let (spec, ds) = match config.mode {
        PipelineMode::Strict => {
            let mut transformer_config = config.transformer.clone();
            transformer_config.seed = derive_seed(config.seed, streams::TRANSFORMER_INIT);
            (
                CvPipelineSpec {
                    scale: config.scale,
                    transformer: Some(TransformerStage::PerFold(transformer_config)),
                    smote: smote_config,
                    ranking,
                    classifier: tuned_spec.clone(),
                },
                state.filtered.subset(cv_ds_rows),
            )
        }
        PipelineMode::Paper => (
            CvPipelineSpec {
                scale: false,
                transformer: Some(TransformerStage::Fixed(Box::new(state.transformer.clone()))),
                smote: smote_config,
                ranking,
                classifier: tuned_spec.clone(),
            },
            state.scaled_all.subset(cv_ds_rows),
        ),
    };
    cross_validate(&spec, &ds, &plan)
}

/// Default search space per classifier kind; the forest spaces span the
/// published optimum (176 estimators, depth 19, bootstrap on).
pub fn search_space_for(kind: ClassifierKind) -> SearchSpace {
    let dims = match kind {
        ClassifierKind::ExtraTrees | ClassifierKind::RandomForest => vec![
            ("n_estimators".to_string(), ParamDomain::Int { lo: 50, hi: 300 }),
            ("max_depth".to_string(), ParamDomain::Int { lo: 3, hi: 25 }),
            (
                "bootstrap".to_string(),
                ParamDomain::Choice { options: vec!["true".into(), "false".into()] },
            ),
        ],
        ClassifierKind::GradientBoost
        | ClassifierKind::GbtVariantA
        | ClassifierKind::GbtVariantB
        | ClassifierKind::GbtVariantC => vec![
            ("n_rounds".to_string(), ParamDomain::Int { lo: 20, hi: 300 }),
            (
                "learning_rate".to_string(),
                ParamDomain::Float { lo: 0.01, hi: 0.5, log: true },
            ),
            ("max_depth".to_string(), ParamDomain::Int { lo: 1, hi: 8 }),
        ],
        ClassifierKind::AdaBoost => {
            vec![("n_rounds".to_string(), ParamDomain::Int { lo: 10, hi: 300 })]
        }
        ClassifierKind::Mlp => vec![
            ("hidden".to_string(), ParamDomain::Int { lo: 8, hi: 128 }),
            ("epochs".to_string(), ParamDomain::Int { lo: 50, hi: 500 }),
            (
                "learning_rate".to_string(),
                ParamDomain::Float { lo: 1e-4, hi: 1e-2, log: true },
            ),
        ],
        ClassifierKind::Lda | ClassifierKind::LogisticRegression => vec![
            // no tunable hyperparameters; a placeholder dimension keeps
            // the search loop uniform
            ("noop".to_string(), ParamDomain::Int { lo: 0, hi: 0 }),
        ],
    };
    SearchSpace { dims }
}

/// Converts sampled tuning parameters into a concrete classifier spec.
pub fn spec_from_params(
    kind: ClassifierKind,
    params: &std::collections::BTreeMap<String, ParamValue>,
    seed: u64,
) -> ClassifierSpec {
    let mut spec = ClassifierSpec::new(kind, seed);
    for (key, value) in params {
        if key == "noop" {
            continue;
        }
        let value = match (key.as_str(), value) {
            ("bootstrap", ParamValue::Str(s)) => ParamValue::Bool(s == "true"),
            _ => value.clone(),
        };
        spec.params.insert(key.clone(), value);
    }
    spec
}

/// Fingerprint of a feature-name layout, guarding classifier loads.
pub fn features_fingerprint(names: &[String]) -> String {
    format!("{:016x}", fnv1a64(names.join(",").as_bytes()))
}

/// Artifacts needed to score new raw rows with a finished run.
pub struct PredictBundle {
    pub schema: Schema,
    pub scaler: ScalerParams,
    pub transformer: TabTransformerModel,
    pub selected: Vec<usize>,
    pub classifier: TrainedClassifier,
    pub nomogram: Option<NomogramSpec>,
}

impl PredictBundle {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let config: PipelineConfig = {
            let text = std::fs::read_to_string(run_dir.join("config.json")).map_err(|e| {
                Error::Data(format!("run dir missing config.json: {e}"))
            })?;
            serde_json::from_str(&text)?
        };
        let schema = config.effective_schema();
        let scaler: ScalerParams = {
            let text = std::fs::read_to_string(run_dir.join("scaler.json"))
                .map_err(|e| Error::Data(format!("run dir missing scaler.json: {e}")))?;
            serde_json::from_str(&text)?
        };
        let mut transformer: TabTransformerModel = load_model(
            &run_dir.join("transformer_model.json"),
            "transformer",
            Some(&schema.fingerprint()),
        )?;
        transformer.restore_after_load();
        let selected_json: serde_json::Value = {
            let text = std::fs::read_to_string(run_dir.join("selected_features.json"))
                .map_err(|e| Error::Data(format!("run dir missing selected_features.json: {e}")))?;
            serde_json::from_str(&text)?
        };
        let selected: Vec<usize> = serde_json::from_value(selected_json["indices"].clone())?;
        let names: Vec<String> = serde_json::from_value(selected_json["names"].clone())?;
        let classifier: TrainedClassifier = load_model(
            &run_dir.join("classifier_model.json"),
            "classifier",
            Some(&features_fingerprint(&names)),
        )?;
        let nomogram_path = run_dir.join("nomogram.json");
        let nomogram = if nomogram_path.exists() {
            let text = std::fs::read_to_string(&nomogram_path)?;
            Some(serde_json::from_str(&text)?)
        } else {
            None
        };
        Ok(PredictBundle { schema, scaler, transformer, selected, classifier, nomogram })
    }

    /// Positive-class probabilities for every row of a raw CSV dataset.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let scaled = self.scaler.apply(ds)?;
        let features = self.transformer.extract_features(&scaled)?;
        let selected = features.select_cols(&self.selected);
        Ok(self.classifier.scores(&selected))
    }

    pub fn selected_matrix(&self, ds: &Dataset) -> Result<Matrix> {
        let scaled = self.scaler.apply(ds)?;
        let features = self.transformer.extract_features(&scaled)?;
        Ok(features.select_cols(&self.selected))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fast_config(dir: &Path, rows: usize, seed: u64) -> PipelineConfig {
        let data = dir.join("fixture.csv");
        std::fs::create_dir_all(dir).unwrap();
        std::fs::write(&data, crate::fixture::generate_csv(rows, seed)).unwrap();
        PipelineConfig {
            data,
            schema: None,
            tau: 3.0,
            zscore_columns: None,
            scale: true,
            smote: true,
            smote_k_neighbors: None,
            transformer: TrainConfig {
                epochs: 8,
                batch_size: 64,
                blocks: 1,
                heads: 2,
                embed_dim: 4,
                shared_width: 2,
                dropout: 0.1,
                ..TrainConfig::default()
            },
            top_n: 8,
            ranking_n_estimators: 20,
            ranking_max_depth: 8,
            roster: Some(vec![
                ClassifierSpec::new(ClassifierKind::ExtraTrees, 1)
                    .with("n_estimators", ParamValue::Int(20)),
                ClassifierSpec::new(ClassifierKind::LogisticRegression, 2),
            ]),
            tune_trials: 3,
            tune_strategy: TuneStrategy::RandomSearch,
            tune_kind: None,
            folds: 3,
            holdout_fraction: 0.2,
            seed,
            use_weight_column: false,
            nomogram_exclusions: vec![],
            calibration_bins: 10,
            mode: PipelineMode::Strict,
            output_dir: dir.join("out"),
        }
    }

    #[test]
    fn pipeline_emits_declared_artifacts() {
        let dir = std::env::temp_dir().join("tabtrans-pipeline-artifacts");
        let _ = std::fs::remove_dir_all(&dir);
        let config = fast_config(&dir, 240, 3);
        let manifest = run_pipeline(&config).unwrap();
        assert!(manifest.error.is_none());
        for artifact in [
            "config.json",
            "stats.json",
            "stats.txt",
            "removal_report.json",
            "fold_plan.json",
            "scaler.json",
            "loss_curve.csv",
            "transformer_model.json",
            "features_train.csv",
            "features_holdout.csv",
            "ranking.csv",
            "selected_features.json",
            "smote_report.json",
            "leaderboard.csv",
            "leaderboard.json",
            "tuning_history.csv",
            "best_params.json",
            "cv_report.csv",
            "cv_report.json",
            "classifier_model.json",
            "holdout_metrics.json",
            "roc.csv",
            "nomogram.json",
            "nomogram_scales.csv",
            "calibration.csv",
            "dca.csv",
        ] {
            assert!(
                config.output_dir.join(artifact).exists(),
                "missing artifact {artifact}"
            );
            assert!(
                manifest.artifacts.contains(&artifact.to_string()),
                "manifest does not list {artifact}"
            );
        }
        assert!(config.output_dir.join("run_manifest.json").exists());
    }

    #[test]
    fn failed_stage_still_writes_manifest() {
        let dir = std::env::temp_dir().join("tabtrans-pipeline-failure");
        let _ = std::fs::remove_dir_all(&dir);
        let mut config = fast_config(&dir, 60, 4);
        config.data = dir.join("missing.csv");
        let err = run_pipeline(&config).unwrap_err();
        assert!(err.to_string().contains("cannot read"));
        let manifest: RunManifest = serde_json::from_str(
            &std::fs::read_to_string(config.output_dir.join("run_manifest.json")).unwrap(),
        )
        .unwrap();
        let error = manifest.error.unwrap();
        assert!(error.contains("load"), "{error}");
    }

    #[test]
    fn predict_bundle_round_trips() {
        let dir = std::env::temp_dir().join("tabtrans-pipeline-predict");
        let _ = std::fs::remove_dir_all(&dir);
        let config = fast_config(&dir, 240, 5);
        run_pipeline(&config).unwrap();
        let bundle = PredictBundle::load(&config.output_dir).unwrap();
        let ds = crate::fixture::generate_dataset(40, 99).unwrap();
        let probs = bundle.predict(&ds).unwrap();
        assert_eq!(probs.len(), 40);
        assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
