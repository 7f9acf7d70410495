use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostKind {
    GradientBoost,
    AdaBoost,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostParams {
    pub kind: BoostKind,
    pub n_rounds: usize,
    pub learning_rate: f64,
    /// Regression-tree depth for gradient boosting; AdaBoost always uses
    /// depth-1 stumps.
    pub max_depth: usize,
    pub seed: u64,
}

impl BoostParams {
    pub fn gradient_boost(n_rounds: usize, learning_rate: f64, max_depth: usize, seed: u64) -> Self {
        BoostParams { kind: BoostKind::GradientBoost, n_rounds, learning_rate, max_depth, seed }
    }

    pub fn adaboost(n_rounds: usize, seed: u64) -> Self {
        BoostParams {
            kind: BoostKind::AdaBoost,
            n_rounds,
            learning_rate: 1.0,
            max_depth: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "boost: learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("boost: max_depth must be positive".into()));
        }
        Ok(())
    }
}

/// Regression tree for the boosting stages: variance-reduction splits,
/// leaf values supplied by the caller's aggregation rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RegNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
    Leaf {
        value: f64,
    },
}

impl RegNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            RegNode::Leaf { value } => *value,
            RegNode::Internal { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostModel {
    pub params: BoostParams,
    /// Log-odds baseline (gradient boost) or unused (AdaBoost).
    pub base_score: f64,
    /// Gradient-boost stages.
    pub stages: Vec<RegNode>,
    /// AdaBoost stumps with their vote weights.
    pub stumps: Vec<(Stump, f64)>,
    /// Class prior, the fallback when no stump carries weight.
    pub prior_positive: f64,
    /// Training log-loss after each stage (gradient boost only).
    pub staged_train_loss: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Predicted class on each side of the threshold.
    pub left_class: u8,
    pub right_class: u8,
}

impl Stump {
    fn predict(&self, row: &[f64]) -> u8 {
        if row[self.feature] <= self.threshold {
            self.left_class
        } else {
            self.right_class
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn fit_boosted(x: &Matrix, y: &[u8], params: &BoostParams) -> Result<BoostModel> {
    params.validate()?;
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Data("boost: empty or mismatched training data".into()));
    }
    match params.kind {
        BoostKind::GradientBoost => fit_gradient_boost(x, y, params),
        BoostKind::AdaBoost => fit_adaboost(x, y, params),
    }
}

/// Stagewise regression trees on the logistic-loss gradient (residual
/// y - p), leaf values by a Newton step, shrunk by the learning rate.
fn fit_gradient_boost(x: &Matrix, y: &[u8], params: &BoostParams) -> Result<BoostModel> {
    let n = x.rows();
    let pos = y.iter().filter(|&&l| l == 1).count() as f64;
    let prior = (pos / n as f64).clamp(1e-12, 1.0 - 1e-12);
    let base_score = (prior / (1.0 - prior)).ln();

    let mut score = vec![base_score; n];
    let mut stages = Vec::with_capacity(params.n_rounds);
    let mut staged_train_loss = Vec::with_capacity(params.n_rounds);
    let all_rows: Vec<usize> = (0..n).collect();
    for round in 0..params.n_rounds {
        let residual: Vec<f64> =
            (0..n).map(|i| y[i] as f64 - sigmoid(score[i])).collect();
        let hessian: Vec<f64> = (0..n)
            .map(|i| {
                let p = sigmoid(score[i]);
                (p * (1.0 - p)).max(1e-12)
            })
            .collect();
        let mut rng = Rng::from_seed(derive_seed(params.seed, round as u64));
        let tree = build_reg_node(
            x,
            &residual,
            &hessian,
            &all_rows,
            params.max_depth,
            0,
            &mut rng,
        );
        for i in 0..n {
            score[i] += params.learning_rate * tree.predict(x.row(i));
        }
        stages.push(tree);
        let loss = -(0..n)
            .map(|i| {
                let p = sigmoid(score[i]).clamp(1e-15, 1.0 - 1e-15);
                if y[i] == 1 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum::<f64>()
            / n as f64;
        staged_train_loss.push(loss);
    }
    Ok(BoostModel {
        params: params.clone(),
        base_score,
        stages,
        stumps: Vec::new(),
        prior_positive: prior,
        staged_train_loss,
    })
}

/// Variance-reduction regression tree; leaf value = sum(residual) /
/// sum(hessian) (one Newton step for logistic loss).
fn build_reg_node(
    x: &Matrix,
    residual: &[f64],
    hessian: &[f64],
    rows: &[usize],
    max_depth: usize,
    depth: usize,
    rng: &mut Rng,
) -> RegNode {
    let leaf = |rows: &[usize]| {
        let num: f64 = rows.iter().map(|&r| residual[r]).sum();
        let den: f64 = rows.iter().map(|&r| hessian[r]).sum();
        RegNode::Leaf { value: num / den.max(1e-12) }
    };
    if depth >= max_depth || rows.len() < 2 {
        return leaf(rows);
    }
    // best split by squared-error reduction of the residuals
    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, score)
    let total_sum: f64 = rows.iter().map(|&r| residual[r]).sum();
    let total_n = rows.len() as f64;
    for feature in 0..x.cols() {
        let mut values: Vec<(f64, f64)> =
            rows.iter().map(|&r| (x.get(r, feature), residual[r])).collect();
        values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_sum = 0.0;
        let mut left_n = 0.0;
        for i in 0..values.len() - 1 {
            left_sum += values[i].1;
            left_n += 1.0;
            if values[i].0 == values[i + 1].0 {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_n = total_n - left_n;
            // maximizing sum^2/n on both sides = minimizing SSE
            let score = left_sum * left_sum / left_n + right_sum * right_sum / right_n;
            let threshold = 0.5 * (values[i].0 + values[i + 1].0);
            if best.is_none() || score > best.unwrap().2 {
                best = Some((feature, threshold, score));
            }
        }
    }
    let _ = rng;
    match best {
        None => leaf(rows),
        Some((feature, threshold, score)) => {
            let baseline = total_sum * total_sum / total_n;
            if score - baseline <= 1e-12 {
                return leaf(rows);
            }
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&row| x.get(row, feature) <= threshold);
            RegNode::Internal {
                feature,
                threshold,
                left: Box::new(build_reg_node(x, residual, hessian, &l, max_depth, depth + 1, rng)),
                right: Box::new(build_reg_node(x, residual, hessian, &r, max_depth, depth + 1, rng)),
            }
        }
    }
}

/// SAMME with depth-1 stumps. A perfect stump (weighted error ~ 0) gets a
/// large capped vote and stops the rounds early.
fn fit_adaboost(x: &Matrix, y: &[u8], params: &BoostParams) -> Result<BoostModel> {
    let n = x.rows();
    let pos = y.iter().filter(|&&l| l == 1).count() as f64;
    let prior = pos / n as f64;
    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps = Vec::new();
    for _ in 0..params.n_rounds {
        let stump = match best_stump(x, y, &weights) {
            Some(s) => s,
            None => break, // no split available (constant features)
        };
        let err: f64 = (0..n)
            .filter(|&i| stump.predict(x.row(i)) != y[i])
            .map(|i| weights[i])
            .sum();
        if err >= 0.5 {
            break; // no better than chance under current weights
        }
        let alpha = if err < 1e-10 {
            ((1.0 - 1e-10) / 1e-10_f64).ln()
        } else {
            ((1.0 - err) / err).ln()
        };
        let stop = err < 1e-10;
        for i in 0..n {
            if stump.predict(x.row(i)) != y[i] {
                weights[i] *= alpha.exp();
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        stumps.push((stump, alpha));
        if stop {
            break;
        }
    }
    Ok(BoostModel {
        params: params.clone(),
        base_score: 0.0,
        stages: Vec::new(),
        stumps,
        prior_positive: prior,
        staged_train_loss: Vec::new(),
    })
}

fn best_stump(x: &Matrix, y: &[u8], weights: &[f64]) -> Option<Stump> {
    let mut best: Option<(Stump, f64)> = None;
    for feature in 0..x.cols() {
        let mut values: Vec<(f64, u8, f64)> = (0..x.rows())
            .map(|r| (x.get(r, feature), y[r], weights[r]))
            .collect();
        values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total_pos: f64 = values.iter().filter(|(_, l, _)| *l == 1).map(|(_, _, w)| w).sum();
        let total: f64 = weights.iter().sum();
        let mut left_pos = 0.0;
        let mut left_w = 0.0;
        for i in 0..values.len() - 1 {
            left_w += values[i].2;
            if values[i].1 == 1 {
                left_pos += values[i].2;
            }
            if values[i].0 == values[i + 1].0 {
                continue;
            }
            let right_pos = total_pos - left_pos;
            let right_w = total - left_w;
            // try both class orientations
            for (lc, rc) in [(0u8, 1u8), (1, 0)] {
                let err_left = if lc == 1 { left_w - left_pos } else { left_pos };
                let err_right = if rc == 1 { right_w - right_pos } else { right_pos };
                let err = err_left + err_right;
                let threshold = 0.5 * (values[i].0 + values[i + 1].0);
                if best.is_none() || err < best.as_ref().unwrap().1 {
                    best = Some((
                        Stump { feature, threshold, left_class: lc, right_class: rc },
                        err,
                    ));
                }
            }
        }
    }
    best.map(|(s, _)| s)
}

impl BoostModel {
    pub fn predict_proba_row(&self, row: &[f64]) -> [f64; 2] {
        match self.params.kind {
            BoostKind::GradientBoost => {
                let mut score = self.base_score;
                for stage in &self.stages {
                    score += self.params.learning_rate * stage.predict(row);
                }
                let p = sigmoid(score);
                [1.0 - p, p]
            }
            BoostKind::AdaBoost => {
                if self.stumps.is_empty() {
                    return [1.0 - self.prior_positive, self.prior_positive];
                }
                let mut votes = [0.0, 0.0];
                for (stump, alpha) in &self.stumps {
                    votes[stump.predict(row) as usize] += alpha;
                }
                let total = votes[0] + votes[1];
                if total <= 0.0 {
                    [1.0 - self.prior_positive, self.prior_positive]
                } else {
                    [votes[0] / total, votes[1] / total]
                }
            }
        }
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

#[cfg(test)]
mod tests {
    use super::*;

    fn threshold_separable(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = Rng::from_seed(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let v = rng.uniform_in(-1.0, 1.0);
            rows.push(vec![v]);
            y.push((v > 0.15) as u8);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn both_kinds_fit_separable_data_perfectly() {
        let (x, y) = threshold_separable(50, 1);
        for params in [
            BoostParams::gradient_boost(10, 0.5, 2, 3),
            BoostParams::adaboost(10, 3),
        ] {
            let model = fit_boosted(&x, &y, &params).unwrap();
            let acc = (0..x.rows())
                .filter(|&r| {
                    let p = model.predict_proba_row(x.row(r));
                    (p[1] > 0.5) as u8 == y[r]
                })
                .count() as f64
                / x.rows() as f64;
            assert_eq!(acc, 1.0, "{:?}", params.kind);
        }
    }

    #[test]
    fn zero_rounds_predicts_prior() {
        let (x, y) = threshold_separable(40, 2);
        let prior = y.iter().filter(|&&l| l == 1).count() as f64 / 40.0;
        for params in [
            BoostParams::gradient_boost(0, 0.1, 3, 1),
            BoostParams::adaboost(0, 1),
        ] {
            let model = fit_boosted(&x, &y, &params).unwrap();
            let p = model.predict_proba_row(x.row(0));
            assert!((p[1] - prior).abs() < 1e-9, "{:?}: {p:?}", params.kind);
        }
    }

    #[test]
    fn gradient_boost_staged_loss_non_increasing() {
        let mut rng = Rng::from_seed(5);
        let n = 120;
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a = rng.normal();
            let b = rng.normal();
            rows.push(vec![a, b]);
            y.push((a + 0.5 * b + 0.3 * rng.normal() > 0.0) as u8);
        }
        let x = Matrix::from_rows(&rows);
        let model = fit_boosted(&x, &y, &BoostParams::gradient_boost(40, 0.2, 3, 7)).unwrap();
        for w in model.staged_train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn invalid_learning_rate_rejected() {
        let (x, y) = threshold_separable(10, 3);
        let params = BoostParams::gradient_boost(5, 0.0, 2, 1);
        assert!(fit_boosted(&x, &y, &params).is_err());
    }

    #[test]
    fn proba_rows_sum_to_one() {
        let (x, y) = threshold_separable(30, 4);
        for params in [
            BoostParams::gradient_boost(15, 0.3, 2, 2),
            BoostParams::adaboost(15, 2),
        ] {
            let model = fit_boosted(&x, &y, &params).unwrap();
            let probs = model.predict_proba(&x);
            for r in 0..probs.rows() {
                assert!((probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = threshold_separable(60, 6);
        let params = BoostParams::gradient_boost(12, 0.2, 3, 9);
        let a = fit_boosted(&x, &y, &params).unwrap();
        let b = fit_boosted(&x, &y, &params).unwrap();
        assert_eq!(a.predict_proba(&x).data(), b.predict_proba(&x).data());
    }
}
