use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, SplitStrategy, TreeNode, TreeParams};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    RandomForest,
    ExtraTrees,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestParams {
    pub kind: ForestKind,
    pub n_estimators: usize,
    pub max_depth: usize,
    /// `None` picks the kind's convention: sqrt(width) for random
    /// forests, the full width for extra trees.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    pub fn random_forest(n_estimators: usize, max_depth: usize, seed: u64) -> Self {
        ForestParams {
            kind: ForestKind::RandomForest,
            n_estimators,
            max_depth,
            max_features: None,
            bootstrap: true,
            seed,
        }
    }

    pub fn extra_trees(n_estimators: usize, max_depth: usize, bootstrap: bool, seed: u64) -> Self {
        ForestParams {
            kind: ForestKind::ExtraTrees,
            n_estimators,
            max_depth,
            max_features: None,
            bootstrap,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.max_depth == 0 {
            return Err(Error::Config("forest: n_estimators and max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<TreeNode>,
    pub tree_seeds: Vec<u64>,
    /// Per-feature mean weighted impurity decrease, normalized to sum 1
    /// (all zeros when no tree ever split).
    pub importances: Vec<f64>,
    pub n_features: usize,
}

/// Fits `n_estimators` trees with independently derived seeds; bootstrap
/// resampling when configured. Deterministic given the seed.
pub fn fit_forest(x: &Matrix, y: &[u8], params: &ForestParams) -> Result<ForestModel> {
    params.validate()?;
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Data("forest: empty or mismatched training data".into()));
    }
    let n = x.rows();
    let width = x.cols();
    let max_features = params.max_features.unwrap_or(match params.kind {
        ForestKind::RandomForest => (width as f64).sqrt().round().max(1.0) as usize,
        ForestKind::ExtraTrees => width,
    });
    let strategy = match params.kind {
        ForestKind::RandomForest => SplitStrategy::BestScan,
        ForestKind::ExtraTrees => SplitStrategy::RandomThreshold,
    };
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        max_features: Some(max_features),
        strategy,
    };

    let tree_seeds: Vec<u64> =
        (0..params.n_estimators).map(|i| derive_seed(params.seed, i as u64)).collect();
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut importance_sum = vec![0.0; width];
    for &seed in &tree_seeds {
        let mut rng = Rng::from_seed(seed);
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.below(n)).collect()
        } else {
            (0..n).collect()
        };
        let fit = fit_tree(x, y, &rows, &tree_params, &mut rng);
        for (acc, v) in importance_sum.iter_mut().zip(&fit.importance) {
            *acc += v;
        }
        trees.push(fit.root);
    }
    let total: f64 = importance_sum.iter().sum();
    let importances = if total > 0.0 {
        importance_sum.iter().map(|v| v / total).collect()
    } else {
        importance_sum
    };
    Ok(ForestModel { params: params.clone(), trees, tree_seeds, importances, n_features: width })
}

impl ForestModel {
    /// Mean of the per-tree probability vectors.
    pub fn predict_proba_row(&self, row: &[f64]) -> [f64; 2] {
        let mut acc = [0.0, 0.0];
        for tree in &self.trees {
            let p = tree.predict_proba(row);
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let k = self.trees.len() as f64;
        [acc[0] / k, acc[1] / k]
    }

    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), 2);
        for r in 0..x.rows() {
            let p = self.predict_proba_row(x.row(r));
            out.set(r, 0, p[0]);
            out.set(r, 1, p[1]);
        }
        out
    }
}

/// Feature indices ordered by non-increasing importance, index ascending
/// on ties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedFeatures {
    /// (feature index, normalized importance), non-increasing.
    pub ranking: Vec<(usize, f64)>,
}

pub fn feature_importance(forest: &ForestModel) -> RankedFeatures {
    let mut ranking: Vec<(usize, f64)> =
        forest.importances.iter().cloned().enumerate().collect();
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    RankedFeatures { ranking }
}

impl RankedFeatures {
    pub fn top_indices(&self, top_n: usize) -> Vec<usize> {
        self.ranking.iter().take(top_n).map(|(i, _)| *i).collect()
    }
}

/// Column subset in rank order; the same selection must be applied to
/// train and test matrices.
pub fn select_top(ranked: &RankedFeatures, top_n: usize, x: &Matrix) -> Result<Matrix> {
    if top_n > x.cols() {
        return Err(Error::Config(format!(
            "select_top: top_n {top_n} exceeds feature width {}",
            x.cols()
        )));
    }
    Ok(x.select_cols(&ranked.top_indices(top_n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable_data(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = Rng::from_seed(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let label = rng.below(2) as u8;
            let center = if label == 1 { 2.0 } else { -2.0 };
            rows.push(vec![center + rng.normal() * 0.5, rng.normal()]);
            y.push(label);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn single_unbootstrapped_tree_equals_forest() {
        let (x, y) = separable_data(40, 1);
        let params = ForestParams {
            kind: ForestKind::RandomForest,
            n_estimators: 1,
            max_depth: 6,
            max_features: Some(2),
            bootstrap: false,
            seed: 3,
        };
        let forest = fit_forest(&x, &y, &params).unwrap();
        for r in 0..x.rows() {
            let tree_p = forest.trees[0].predict_proba(x.row(r));
            let forest_p = forest.predict_proba_row(x.row(r));
            assert_eq!(tree_p, forest_p);
        }
    }

    #[test]
    fn tuned_extra_trees_spec_accepted() {
        let (x, y) = separable_data(80, 2);
        // 46-wide feature layout mirror: pad with noise columns
        let mut rng = Rng::from_seed(9);
        let noise = Matrix::gaussian(80, 44, 1.0, &mut rng);
        let wide = x.hstack(&noise);
        let params = ForestParams::extra_trees(176, 19, true, 4);
        let forest = fit_forest(&wide, &y, &params).unwrap();
        assert_eq!(forest.trees.len(), 176);
        let probs = forest.predict_proba(&wide);
        let acc = (0..wide.rows())
            .filter(|&r| (probs.get(r, 1) > 0.5) as u8 == y[r])
            .count() as f64
            / 80.0;
        assert!(acc > 0.9, "training accuracy {acc}");
    }

    #[test]
    fn same_seed_reproduces_predictions() {
        let (x, y) = separable_data(60, 5);
        let params = ForestParams::random_forest(20, 8, 11);
        let a = fit_forest(&x, &y, &params).unwrap();
        let b = fit_forest(&x, &y, &params).unwrap();
        let (probe, _) = separable_data(20, 6);
        assert_eq!(a.predict_proba(&probe).data(), b.predict_proba(&probe).data());
        assert_eq!(a.importances, b.importances);
    }

    #[test]
    fn importances_sum_to_one_and_skip_constant_features() {
        let (x, y) = separable_data(60, 7);
        let constant = Matrix::zeros(60, 1);
        let wide = x.hstack(&constant);
        let forest = fit_forest(&wide, &y, &ForestParams::random_forest(15, 6, 13)).unwrap();
        let sum: f64 = forest.importances.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(forest.importances[2], 0.0);
        assert!(forest.importances.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn decisive_feature_ranked_first_across_seeds() {
        for seed in 0..20 {
            let mut rng = Rng::from_seed(100 + seed);
            let n = 80;
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for _ in 0..n {
                let label = rng.below(2) as u8;
                // feature 0 alone determines the label; 1..4 are noise
                rows.push(vec![
                    label as f64,
                    rng.normal(),
                    rng.normal(),
                    rng.normal(),
                ]);
                y.push(label);
            }
            let x = Matrix::from_rows(&rows);
            let forest = fit_forest(&x, &y, &ForestParams::random_forest(20, 5, seed)).unwrap();
            let ranked = feature_importance(&forest);
            assert_eq!(ranked.ranking[0].0, 0, "seed {seed}");
        }
    }

    #[test]
    fn ranking_is_non_increasing_with_index_tiebreak() {
        let (x, y) = separable_data(50, 8);
        let forest = fit_forest(&x, &y, &ForestParams::random_forest(10, 5, 1)).unwrap();
        let ranked = feature_importance(&forest);
        for w in ranked.ranking.windows(2) {
            assert!(w[0].1 >= w[1].1);
            if w[0].1 == w[1].1 {
                assert!(w[0].0 < w[1].0);
            }
        }
    }

    #[test]
    fn select_top_full_width_is_rank_reorder() {
        let (x, y) = separable_data(30, 9);
        let forest = fit_forest(&x, &y, &ForestParams::random_forest(10, 5, 2)).unwrap();
        let ranked = feature_importance(&forest);
        let selected = select_top(&ranked, 2, &x).unwrap();
        assert_eq!(selected.cols(), 2);
        let order = ranked.top_indices(2);
        for r in 0..x.rows() {
            assert_eq!(selected.get(r, 0), x.get(r, order[0]));
            assert_eq!(selected.get(r, 1), x.get(r, order[1]));
        }
        assert!(select_top(&ranked, 3, &x).is_err());
    }

    #[test]
    fn both_kinds_learn_a_two_feature_rule() {
        // 200-row training set whose label is a depth-2 rule of features
        // 0 and 1 among 10; both forest kinds must clear 95% on held-out
        // draws from the same distribution
        for seed in 0..5 {
            let mut rng = Rng::from_seed(200 + seed);
            let sample = |rng: &mut Rng, n: usize| {
                let mut rows = Vec::new();
                let mut y = Vec::new();
                for _ in 0..n {
                    let x: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
                    let label = ((x[0] > 0.0) && (x[1] > -0.3)) as u8;
                    rows.push(x);
                    y.push(label);
                }
                (Matrix::from_rows(&rows), y)
            };
            let (xt, yt) = sample(&mut rng, 200);
            let (xe, ye) = sample(&mut rng, 200);

            for params in [
                ForestParams::random_forest(80, 10, seed),
                ForestParams::extra_trees(80, 10, false, seed),
            ] {
                let forest = fit_forest(&xt, &yt, &params).unwrap();
                let correct = (0..xe.rows())
                    .filter(|&r| {
                        let p = forest.predict_proba_row(xe.row(r));
                        (p[1] > 0.5) as u8 == ye[r]
                    })
                    .count();
                let acc = correct as f64 / xe.rows() as f64;
                assert!(acc >= 0.95, "{:?} seed {seed}: acc {acc}", params.kind);
            }
        }
    }
}
