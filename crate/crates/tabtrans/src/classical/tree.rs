use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, Rng};

/// Binary classification tree node. Leaves carry Laplace-smoothed class
/// probabilities so downstream log-loss and calibration never see hard
/// 0/1 estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// P(class 0), P(class 1); sums to 1.
        proba: [f64; 2],
    },
}

impl TreeNode {
    pub fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        match self {
            TreeNode::Leaf { proba } => *proba,
            TreeNode::Internal { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict_proba(row)
                } else {
                    right.predict_proba(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }
}

/// How candidate split thresholds are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Scan the midpoints of consecutive distinct values, keep the best.
    BestScan,
    /// Draw one uniform-random threshold per candidate feature.
    RandomThreshold,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Number of features examined per split; `None` means all.
    pub max_features: Option<usize>,
    pub strategy: SplitStrategy,
}

/// Gini impurity of a binary label multiset given (count0, count1).
pub fn gini(count0: f64, count1: f64) -> f64 {
    let n = count0 + count1;
    if n <= 0.0 {
        return 0.0;
    }
    let p0 = count0 / n;
    let p1 = count1 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    weighted_child_impurity: f64,
}

pub(super) struct TreeFit {
    pub root: TreeNode,
    /// Weighted impurity decrease accumulated per feature, the raw
    /// material of impurity importances (weights relative to this tree's
    /// root sample count).
    pub importance: Vec<f64>,
}

/// Greedy Gini tree over the given row subset. Stops at max_depth, pure
/// nodes, or fewer than 2 samples.
pub(super) fn fit_tree(
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> TreeFit {
    let mut importance = vec![0.0; x.cols()];
    let n_total = rows.len() as f64;
    let root = build_node(x, y, rows, params, rng, 0, n_total, &mut importance);
    TreeFit { root, importance }
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
    depth: usize,
    n_root: f64,
    importance: &mut [f64],
) -> TreeNode {
    let count1 = rows.iter().filter(|&&r| y[r] == 1).count() as f64;
    let count0 = rows.len() as f64 - count1;
    let node_impurity = gini(count0, count1);

    let stop = depth >= params.max_depth
        || rows.len() < 2
        || count0 == 0.0
        || count1 == 0.0;
    if !stop {
        if let Some(split) = best_split(x, y, rows, params, rng) {
            // Splitting can never increase the weighted Gini (concavity),
            // so any found candidate is at worst a tie. Ties are kept:
            // they are what lets depth-2 trees crack XOR-style targets
            // where the first cut alone buys nothing.
            let decrease = (node_impurity - split.weighted_child_impurity).max(0.0);
            {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| x.get(r, split.feature) <= split.threshold);
                importance[split.feature] += rows.len() as f64 / n_root * decrease;
                let left = build_node(
                    x, y, &left_rows, params, rng, depth + 1, n_root, importance,
                );
                let right = build_node(
                    x, y, &right_rows, params, rng, depth + 1, n_root, importance,
                );
                return TreeNode::Internal {
                    feature: split.feature,
                    threshold: split.threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                };
            }
        }
    }
    // Laplace (+1) smoothing
    let n = rows.len() as f64;
    TreeNode::Leaf {
        proba: [(count0 + 1.0) / (n + 2.0), (count1 + 1.0) / (n + 2.0)],
    }
}

fn best_split(
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> Option<SplitCandidate> {
    let n_features = x.cols();
    let k = params.max_features.unwrap_or(n_features).min(n_features).max(1);
    let candidates: Vec<usize> = if k == n_features {
        (0..n_features).collect()
    } else {
        let mut idx = rng.sample_indices(n_features, k);
        idx.sort_unstable();
        idx
    };

    let mut best: Option<SplitCandidate> = None;
    for &feature in &candidates {
        let found = match params.strategy {
            SplitStrategy::BestScan => scan_feature(x, y, rows, feature),
            SplitStrategy::RandomThreshold => random_threshold(x, y, rows, feature, rng),
        };
        if let Some(c) = found {
            let better = match &best {
                None => true,
                Some(b) => c.weighted_child_impurity < b.weighted_child_impurity,
            };
            if better {
                best = Some(c);
            }
        }
    }
    best
}

fn scan_feature(x: &Matrix, y: &[u8], rows: &[usize], feature: usize) -> Option<SplitCandidate> {
    let mut values: Vec<(f64, u8)> = rows.iter().map(|&r| (x.get(r, feature), y[r])).collect();
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = values.len() as f64;
    let total1: f64 = values.iter().filter(|(_, l)| *l == 1).count() as f64;
    let total0 = n - total1;

    let mut left0 = 0.0;
    let mut left1 = 0.0;
    let mut best: Option<SplitCandidate> = None;
    for i in 0..values.len() - 1 {
        if values[i].1 == 1 {
            left1 += 1.0;
        } else {
            left0 += 1.0;
        }
        if values[i].0 == values[i + 1].0 {
            continue;
        }
        let nl = left0 + left1;
        let nr = n - nl;
        let weighted = nl / n * gini(left0, left1)
            + nr / n * gini(total0 - left0, total1 - left1);
        let threshold = 0.5 * (values[i].0 + values[i + 1].0);
        let better = best
            .as_ref()
            .is_none_or(|b| weighted < b.weighted_child_impurity);
        if better {
            best = Some(SplitCandidate { feature, threshold, weighted_child_impurity: weighted });
        }
    }
    best
}

fn random_threshold(
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    feature: usize,
    rng: &mut Rng,
) -> Option<SplitCandidate> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in rows {
        let v = x.get(r, feature);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        return None; // constant feature offers no split
    }
    let threshold = rng.uniform_in(lo, hi);
    let mut left0 = 0.0;
    let mut left1 = 0.0;
    let mut right0 = 0.0;
    let mut right1 = 0.0;
    for &r in rows {
        let side_left = x.get(r, feature) <= threshold;
        match (side_left, y[r]) {
            (true, 1) => left1 += 1.0,
            (true, _) => left0 += 1.0,
            (false, 1) => right1 += 1.0,
            (false, _) => right0 += 1.0,
        }
    }
    let n = rows.len() as f64;
    let nl = left0 + left1;
    let nr = right0 + right1;
    if nl == 0.0 || nr == 0.0 {
        return None;
    }
    let weighted = nl / n * gini(left0, left1) + nr / n * gini(right0, right1);
    Some(SplitCandidate { feature, threshold, weighted_child_impurity: weighted })
}
