use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Rng};

/// Stratified k-fold assignment over the non-holdout rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Per-row fold index; `None` marks holdout rows.
    pub assignments: Vec<Option<u32>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_rows(&self, fold: u32) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some(fold))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn training_rows(&self, fold: u32) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_some() && **a != Some(fold))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn non_holdout_rows(&self) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_some())
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub plan: FoldPlan,
    pub holdout: Vec<bool>,
}

/// Draws a stratified holdout first, then deals the remaining rows of
/// each class round-robin into `k` stratified folds. Deterministic given
/// the seed.
pub fn stratified_split(
    ds: &Dataset,
    k: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<SplitResult> {
    let (assignments, holdout) = stratified_assignments(&ds.labels, k, holdout_fraction, seed)?;
    Ok(SplitResult { plan: FoldPlan { k, assignments, seed }, holdout })
}

/// Label-level splitting core shared by dataset splits and the
/// feature-matrix cross-validation used during tuning.
pub fn stratified_assignments(
    labels: &[u8],
    k: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(Vec<Option<u32>>, Vec<bool>)> {
    if k < 2 {
        return Err(Error::Config(format!("stratified_split: k must be >= 2, got {k}")));
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::Config(format!(
            "stratified_split: holdout fraction must be in [0, 1), got {holdout_fraction}"
        )));
    }
    let mut assignments: Vec<Option<u32>> = vec![None; labels.len()];
    let mut holdout = vec![false; labels.len()];

    for class in 0..2u8 {
        let mut rows: Vec<usize> =
            (0..labels.len()).filter(|&r| labels[r] == class).collect();
        if rows.len() < k {
            return Err(Error::Data(format!(
                "class {class} has {} members, fewer than k = {k}",
                rows.len()
            )));
        }
        let mut rng = Rng::from_seed(derive_seed(seed, class as u64));
        rng.shuffle(&mut rows);
        let n_holdout = (rows.len() as f64 * holdout_fraction).round() as usize;
        for &r in rows.iter().take(n_holdout) {
            holdout[r] = true;
        }
        for (i, &r) in rows.iter().skip(n_holdout).enumerate() {
            assignments[r] = Some((i % k) as u32);
        }
    }
    Ok((assignments, holdout))
}
