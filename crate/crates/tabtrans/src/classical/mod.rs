//! In-house classical classifiers behind one probability-predicting
//! contract, plus impurity-based feature ranking and top-N selection.

mod boost;
mod forest;
mod linear;
mod mlp;
mod tree;

pub use boost::{fit_boosted, BoostKind, BoostModel, BoostParams};
pub use forest::{
    feature_importance, fit_forest, select_top, ForestKind, ForestModel, ForestParams,
    RankedFeatures,
};
pub use linear::{fit_linear, LinearKind, LinearModel};
pub use mlp::{fit_mlp, MlpModel, MlpParams};
pub use tree::{gini, SplitStrategy, TreeNode, TreeParams};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    ExtraTrees,
    RandomForest,
    GradientBoost,
    #[serde(rename = "adaboost")]
    AdaBoost,
    Mlp,
    Lda,
    LogisticRegression,
    /// Deep, slow-shrinkage gradient-boost preset.
    GbtVariantA,
    /// Shallow, aggressive-shrinkage preset.
    GbtVariantB,
    /// Mid-depth balanced preset.
    GbtVariantC,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 10] = [
        ClassifierKind::ExtraTrees,
        ClassifierKind::RandomForest,
        ClassifierKind::GradientBoost,
        ClassifierKind::AdaBoost,
        ClassifierKind::Mlp,
        ClassifierKind::Lda,
        ClassifierKind::LogisticRegression,
        ClassifierKind::GbtVariantA,
        ClassifierKind::GbtVariantB,
        ClassifierKind::GbtVariantC,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::ExtraTrees => "extra_trees",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::GradientBoost => "gradient_boost",
            ClassifierKind::AdaBoost => "adaboost",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Lda => "lda",
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::GbtVariantA => "gbt_variant_a",
            ClassifierKind::GbtVariantB => "gbt_variant_b",
            ClassifierKind::GbtVariantC => "gbt_variant_c",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown classifier kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(i) if *i >= 0 => Some(*i as usize),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Float(f) => Some(*f),
            ParamValue::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

/// A classifier kind with its hyperparameter overrides and seed; the
/// leaderboard, tuner, and persisted models all speak this type.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec { kind, params: BTreeMap::new(), seed }
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn allowed_keys(&self) -> &'static [&'static str] {
        match self.kind {
            ClassifierKind::ExtraTrees | ClassifierKind::RandomForest => {
                &["n_estimators", "max_depth", "max_features", "bootstrap"]
            }
            ClassifierKind::GradientBoost
            | ClassifierKind::GbtVariantA
            | ClassifierKind::GbtVariantB
            | ClassifierKind::GbtVariantC => &["n_rounds", "learning_rate", "max_depth"],
            ClassifierKind::AdaBoost => &["n_rounds"],
            ClassifierKind::Mlp => &["hidden", "epochs", "batch_size", "learning_rate"],
            ClassifierKind::Lda | ClassifierKind::LogisticRegression => &[],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = self.allowed_keys();
        for key in self.params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "classifier {}: unknown hyperparameter '{key}' (allowed: {})",
                    self.kind.as_str(),
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn usize_param(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_usize().ok_or_else(|| {
                Error::Config(format!(
                    "classifier {}: '{key}' must be a non-negative integer",
                    self.kind.as_str()
                ))
            }),
        }
    }

    fn f64_param(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| {
                Error::Config(format!(
                    "classifier {}: '{key}' must be numeric",
                    self.kind.as_str()
                ))
            }),
        }
    }

    fn bool_param(&self, key: &str, default: bool) -> Result<bool> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| {
                Error::Config(format!(
                    "classifier {}: '{key}' must be a boolean",
                    self.kind.as_str()
                ))
            }),
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[u8]) -> Result<TrainedClassifier> {
        self.validate()?;
        let model = match self.kind {
            ClassifierKind::ExtraTrees => {
                let params = ForestParams {
                    kind: ForestKind::ExtraTrees,
                    n_estimators: self.usize_param("n_estimators", 100)?,
                    max_depth: self.usize_param("max_depth", 12)?,
                    max_features: self.params.get("max_features").and_then(|v| v.as_usize()),
                    bootstrap: self.bool_param("bootstrap", false)?,
                    seed: self.seed,
                };
                TrainedClassifier::Forest(fit_forest(x, y, &params)?)
            }
            ClassifierKind::RandomForest => {
                let params = ForestParams {
                    kind: ForestKind::RandomForest,
                    n_estimators: self.usize_param("n_estimators", 100)?,
                    max_depth: self.usize_param("max_depth", 12)?,
                    max_features: self.params.get("max_features").and_then(|v| v.as_usize()),
                    bootstrap: self.bool_param("bootstrap", true)?,
                    seed: self.seed,
                };
                TrainedClassifier::Forest(fit_forest(x, y, &params)?)
            }
            ClassifierKind::GradientBoost => self.fit_gbt(x, y, 100, 0.1, 3)?,
            ClassifierKind::GbtVariantA => self.fit_gbt(x, y, 200, 0.05, 6)?,
            ClassifierKind::GbtVariantB => self.fit_gbt(x, y, 150, 0.3, 2)?,
            ClassifierKind::GbtVariantC => self.fit_gbt(x, y, 120, 0.1, 4)?,
            ClassifierKind::AdaBoost => {
                let params = BoostParams::adaboost(self.usize_param("n_rounds", 100)?, self.seed);
                TrainedClassifier::Boost(fit_boosted(x, y, &params)?)
            }
            ClassifierKind::Mlp => {
                let params = MlpParams {
                    hidden: self.usize_param("hidden", 64)?,
                    epochs: self.usize_param("epochs", 300)?,
                    batch_size: self.usize_param("batch_size", 32)?,
                    learning_rate: self.f64_param("learning_rate", 0.001)?,
                    seed: self.seed,
                };
                TrainedClassifier::Mlp(fit_mlp(x, y, &params)?)
            }
            ClassifierKind::Lda => {
                TrainedClassifier::Linear(fit_linear(x, y, LinearKind::Lda)?)
            }
            ClassifierKind::LogisticRegression => {
                TrainedClassifier::Linear(fit_linear(x, y, LinearKind::LogisticRegression)?)
            }
        };
        Ok(model)
    }

    fn fit_gbt(
        &self,
        x: &Matrix,
        y: &[u8],
        rounds: usize,
        lr: f64,
        depth: usize,
    ) -> Result<TrainedClassifier> {
        let params = BoostParams::gradient_boost(
            self.usize_param("n_rounds", rounds)?,
            self.f64_param("learning_rate", lr)?,
            self.usize_param("max_depth", depth)?,
            self.seed,
        );
        Ok(TrainedClassifier::Boost(fit_boosted(x, y, &params)?))
    }
}

/// The ten-model leaderboard roster, seeds derived per kind.
pub fn default_roster(seed: u64) -> Vec<ClassifierSpec> {
    ClassifierKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            ClassifierSpec::new(kind, crate::numerics::derive_seed(seed, i as u64))
        })
        .collect()
}

/// A fitted classical model; every variant predicts a probability pair
/// per row.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Forest(ForestModel),
    Boost(BoostModel),
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl TrainedClassifier {
    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        match self {
            TrainedClassifier::Forest(m) => m.predict_proba(x),
            TrainedClassifier::Boost(m) => m.predict_proba(x),
            TrainedClassifier::Linear(m) => m.predict_proba(x),
            TrainedClassifier::Mlp(m) => m.predict_proba(x),
        }
    }

    /// Positive-class probability per row.
    pub fn scores(&self, x: &Matrix) -> Vec<f64> {
        self.predict_proba(x).col(1)
    }

    pub fn predict_labels(&self, x: &Matrix) -> Vec<u8> {
        self.scores(x).iter().map(|&p| (p > 0.5) as u8).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn blobs(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = Rng::from_seed(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let label = rng.below(2) as u8;
            let c = if label == 1 { 1.5 } else { -1.5 };
            rows.push(vec![c + rng.normal(), rng.normal() * 0.5]);
            y.push(label);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn roster_has_ten_distinct_kinds() {
        let roster = default_roster(1);
        assert_eq!(roster.len(), 10);
        let mut kinds: Vec<&str> = roster.iter().map(|s| s.kind.as_str()).collect();
        kinds.sort_unstable();
        kinds.dedup();
        assert_eq!(kinds.len(), 10);
    }

    #[test]
    fn every_kind_fits_and_emits_unit_probability_rows() {
        let (x, y) = blobs(60, 3);
        for spec in default_roster(5) {
            let model = spec
                .fit(&x, &y)
                .unwrap_or_else(|e| panic!("{} failed: {e}", spec.kind.as_str()));
            let probs = model.predict_proba(&x);
            for r in 0..probs.rows() {
                let sum: f64 = probs.row(r).iter().sum();
                assert!(
                    (sum - 1.0).abs() < 1e-9,
                    "{}: row {r} sums to {sum}",
                    spec.kind.as_str()
                );
            }
            let labels = model.predict_labels(&x);
            let scores = model.scores(&x);
            for (l, s) in labels.iter().zip(&scores) {
                assert_eq!(*l, (*s > 0.5) as u8);
            }
        }
    }

    #[test]
    fn unknown_hyperparameter_rejected() {
        let spec = ClassifierSpec::new(ClassifierKind::ExtraTrees, 1)
            .with("n_trees", ParamValue::Int(10));
        assert!(spec.validate().is_err());
        let spec = ClassifierSpec::new(ClassifierKind::Lda, 1)
            .with("n_estimators", ParamValue::Int(10));
        assert!(spec.validate().is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ClassifierKind::ALL {
            assert_eq!(ClassifierKind::parse(kind.as_str()).unwrap(), kind);
        }
        assert!(ClassifierKind::parse("catboost").is_err());
    }

    #[test]
    fn spec_overrides_apply() {
        let (x, y) = blobs(30, 4);
        let spec = ClassifierSpec::new(ClassifierKind::ExtraTrees, 2)
            .with("n_estimators", ParamValue::Int(7))
            .with("max_depth", ParamValue::Int(3))
            .with("bootstrap", ParamValue::Bool(true));
        match spec.fit(&x, &y).unwrap() {
            TrainedClassifier::Forest(f) => {
                assert_eq!(f.trees.len(), 7);
                assert!(f.params.bootstrap);
            }
            _ => panic!("expected forest"),
        }
    }
}
