use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tabtrans::classical::{
    feature_importance, fit_forest, ClassifierKind, ClassifierSpec, ForestParams, ParamValue,
    TrainedClassifier,
};
use tabtrans::data::{heart_schema, load_csv, zscore_filter, Schema, SmoteConfig};
use tabtrans::error::{Error, Result};
use tabtrans::eval::{confusion, metrics, roc_auc, tune, TuneStrategy};
use tabtrans::nomogram::{calibration_curve, decision_curve, fit_nomogram};
use tabtrans::pipeline::{
    features_fingerprint, run_pipeline, run_pipeline_until, search_space_for, spec_from_params,
    PipelineConfig, PredictBundle, StageLimit,
};
use tabtrans::report;
use tabtrans::stats::association_table;

#[derive(Parser)]
#[command(
    name = "tabtrans",
    version,
    about = "Tabular transformer feature extraction with a classical-ML pipeline and nomogram risk scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            config.output_dir = dir.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic heart-shaped CSV for tests and demos.
    Fixture {
        #[arg(long, default_value_t = 1190)]
        rows: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical association report (summaries + tests per feature).
    Stats {
        #[arg(long)]
        data: PathBuf,
        /// Schema override (JSON).
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Apply the z-score filter at this threshold before testing.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the full pipeline from a config file.
    Run(ConfigArgs),
    /// Run the pipeline front only: stats, filter, split, scale, and
    /// transformer training.
    TrainTransformer(ConfigArgs),
    /// Extract contextual features for a CSV using a finished run.
    Extract {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank the columns of a feature CSV by forest impurity importance.
    Rank {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one classifier on a feature CSV.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Classifier kind (extra_trees, random_forest, gradient_boost,
        /// adaboost, mlp, lda, logistic_regression, gbt_variant_a/b/c).
        #[arg(long)]
        kind: String,
        /// Hyperparameter overrides as a JSON object.
        #[arg(long)]
        params_json: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Balance the training data with SMOTE first.
        #[arg(long)]
        smote: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hyperparameter search for one classifier kind on a feature CSV.
    Tune {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value = "random_search")]
        strategy: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate a saved classifier on a feature CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit a nomogram on a feature CSV and emit its scales and curves.
    Nomogram {
        #[arg(long)]
        features: PathBuf,
        /// Comma-separated feature indices to exclude manually.
        #[arg(long)]
        exclude: Option<String>,
        #[arg(long, default_value_t = 10)]
        calibration_bins: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score new raw rows with a finished run's model chain.
    Predict {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read_schema(path: &Option<PathBuf>) -> Result<Schema> {
    match path {
        None => Ok(heart_schema()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read schema '{}': {e}", p.display())))?;
            let schema: Schema = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("schema '{}': {e}", p.display())))?;
            schema.validate()?;
            Ok(schema)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Fixture { rows, seed, out } => {
            std::fs::write(&out, tabtrans::fixture::generate_csv(rows, seed))?;
            println!("wrote {rows} rows to {}", out.display());
            Ok(())
        }
        Command::Stats { data, schema, tau, out_dir } => {
            let schema = read_schema(&schema)?;
            let loaded = load_csv(&data, &schema)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            let ds = match tau {
                Some(tau) => zscore_filter(&loaded.dataset, tau, None)?.0,
                None => loaded.dataset,
            };
            std::fs::create_dir_all(&out_dir)?;
            let rows = association_table(&ds)?;
            report::write_stats_report(&out_dir, &rows)?;
            println!("{}", std::fs::read_to_string(out_dir.join("stats.txt"))?);
            Ok(())
        }
        Command::Run(args) => {
            let config = args.load()?;
            let manifest = run_pipeline(&config)?;
            println!(
                "run complete: {} stages, {} artifacts in {}",
                manifest.stages.len(),
                manifest.artifacts.len(),
                config.output_dir.display()
            );
            Ok(())
        }
        Command::TrainTransformer(args) => {
            let config = args.load()?;
            run_pipeline_until(&config, StageLimit::TransformerOnly)?;
            println!(
                "transformer trained; model and loss curve in {}",
                config.output_dir.display()
            );
            Ok(())
        }
        Command::Extract { run_dir, data, out } => {
            let bundle = PredictBundle::load(&run_dir)?;
            let loaded = load_csv(&data, &bundle.schema)?;
            let scaled = bundle.scaler.apply(&loaded.dataset)?;
            let features = bundle.transformer.extract_features(&scaled)?;
            report::write_features_csv(
                &out,
                &features,
                &bundle.transformer.feature_names(),
                &loaded.dataset.labels,
            )?;
            println!(
                "wrote {} x {} features to {}",
                features.rows(),
                features.cols(),
                out.display()
            );
            Ok(())
        }
        Command::Rank { features, top_n, seed, out } => {
            let (x, names, y) = report::read_features_csv(&features)?;
            let forest = fit_forest(&x, &y, &ForestParams::random_forest(100, 12, seed))?;
            let ranked = feature_importance(&forest);
            report::write_ranking(&out, &ranked, &names, top_n.min(x.cols()))?;
            println!("wrote ranking to {}", out.display());
            Ok(())
        }
        Command::Train { features, kind, params_json, seed, smote, out } => {
            let (x, names, y) = report::read_features_csv(&features)?;
            let kind = ClassifierKind::parse(&kind)?;
            let mut spec = ClassifierSpec::new(kind, seed);
            if let Some(json) = params_json {
                let params: BTreeMap<String, ParamValue> = serde_json::from_str(&json)
                    .map_err(|e| Error::Config(format!("--params-json: {e}")))?;
                spec.params = params;
            }
            spec.validate()?;
            let (x, y) = if smote {
                let balanced =
                    tabtrans::data::smote(&x, &y, &SmoteConfig { k_neighbors: 5, seed })?;
                (balanced.features, balanced.labels)
            } else {
                (x, y)
            };
            let model = spec.fit(&x, &y)?;
            tabtrans::persist::save_model(&out, "classifier", &features_fingerprint(&names), &model)?;
            println!(
                "trained {} on {} rows, saved to {}",
                spec.kind.as_str(),
                x.rows(),
                out.display()
            );
            Ok(())
        }
        Command::Tune { features, kind, trials, strategy, folds, seed, out_dir } => {
            let (x, _, y) = report::read_features_csv(&features)?;
            let kind = ClassifierKind::parse(&kind)?;
            let strategy = match strategy.as_str() {
                "random_search" => TuneStrategy::RandomSearch,
                "tpe" => TuneStrategy::Tpe,
                other => {
                    return Err(Error::Config(format!(
                        "unknown strategy '{other}' (random_search or tpe)"
                    )))
                }
            };
            let space = search_space_for(kind);
            let mut objective = |params: &BTreeMap<String, ParamValue>| {
                let spec = spec_from_params(kind, params, seed);
                tabtrans::eval::cv_accuracy_on_features(&x, &y, folds, seed, None, &spec)
            };
            let (best, history) = tune(&space, &mut objective, trials, seed, strategy)?;
            std::fs::create_dir_all(&out_dir)?;
            report::write_tuning_history(&out_dir.join("tuning_history.csv"), &history)?;
            let best_spec = spec_from_params(kind, &best.params, seed);
            report::write_json(&out_dir.join("best_params.json"), &best_spec)?;
            println!(
                "best objective {:.4} at trial {} ({} trials)",
                best.objective,
                best.trial,
                history.len()
            );
            Ok(())
        }
        Command::Evaluate { model, features, out_dir } => {
            let (x, _, y) = report::read_features_csv(&features)?;
            let model: TrainedClassifier =
                tabtrans::persist::load_model(&model, "classifier", None)?;
            let scores = model.scores(&x);
            let predictions: Vec<u8> = scores.iter().map(|&s| (s > 0.5) as u8).collect();
            let cm = confusion(&y, &predictions)?;
            let mut entry = metrics(&cm)?;
            let roc = roc_auc(&scores, &y)?;
            entry.auc = Some(roc.auc);
            std::fs::create_dir_all(&out_dir)?;
            report::write_json(&out_dir.join("metrics.json"), &entry)?;
            report::write_roc(&out_dir.join("roc.csv"), &roc)?;
            println!(
                "accuracy {:.4}, auc {:.4}; reports in {}",
                entry.accuracy,
                roc.auc,
                out_dir.display()
            );
            Ok(())
        }
        Command::Nomogram { features, exclude, calibration_bins, out_dir } => {
            let (x, names, y) = report::read_features_csv(&features)?;
            let exclusions: Vec<usize> = match exclude {
                None => vec![],
                Some(list) => list
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<usize>().map_err(|_| {
                            Error::Config(format!("--exclude: '{s}' is not an index"))
                        })
                    })
                    .collect::<Result<_>>()?,
            };
            let spec = fit_nomogram(&x, &y, &names, &exclusions)?;
            std::fs::create_dir_all(&out_dir)?;
            report::write_nomogram(&out_dir, &spec)?;
            let probs: Vec<f64> = (0..x.rows())
                .map(|r| spec.probability_direct(&spec.project_row(x.row(r))))
                .collect();
            let bins = calibration_curve(&probs, &y, calibration_bins)?;
            report::write_calibration(&out_dir.join("calibration.csv"), &bins)?;
            let thresholds: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
            let dca = decision_curve(&probs, &y, &thresholds)?;
            report::write_decision_curve(&out_dir.join("dca.csv"), &dca)?;
            println!(
                "nomogram with {} features ({} excluded); reports in {}",
                spec.features.len(),
                spec.excluded.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Predict { run_dir, data, out } => {
            let bundle = PredictBundle::load(&run_dir)?;
            let loaded = load_csv(&data, &bundle.schema)?;
            let probs = bundle.predict(&loaded.dataset)?;
            let rows: Vec<Vec<String>> = probs
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    vec![i.to_string(), format!("{p:.6}"), ((*p > 0.5) as u8).to_string()]
                })
                .collect();
            report::write_csv(&out, &["row", "probability", "predicted"], &rows)?;
            println!("wrote {} predictions to {}", probs.len(), out.display());
            Ok(())
        }
    }
}
