//! Points-based logistic risk scoring: a fitted logistic regression is
//! re-parameterized so that each feature maps to a points scale and the
//! total maps back to event probability exactly; plus calibration curves
//! and decision-curve analysis.

use serde::{Deserialize, Serialize};

use crate::classical::{fit_linear, LinearKind};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Collinear,
    Manual,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcludedFeature {
    pub index: usize,
    pub name: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NomogramFeature {
    /// Column index in the fitting matrix.
    pub index: usize,
    pub name: String,
    pub coefficient: f64,
    /// Observed reference range in the fitting data.
    pub lo: f64,
    pub hi: f64,
    /// Points at the feature's maximum-risk end, |beta| * (hi - lo) / u.
    pub max_points: f64,
}

/// Exact affine re-parameterization of a logistic regression into a
/// points system: probability(total) = sigmoid(a * total + b).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NomogramSpec {
    pub features: Vec<NomogramFeature>,
    pub intercept: f64,
    /// Points unit: linear-predictor change per point.
    pub points_unit: f64,
    /// Total-points-to-linear-predictor map (a, b).
    pub map_a: f64,
    pub map_b: f64,
    pub excluded: Vec<ExcludedFeature>,
}

/// Maximum points assigned to the widest feature's span.
pub const MAX_POINTS: f64 = 10.0;
/// Absolute pairwise correlation above which the later column is dropped.
pub const COLLINEARITY_CORRELATION: f64 = 0.999;
/// Gram-Schmidt residual ratio below which a column is rank-deficient.
const RANK_EPS: f64 = 1e-6;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let mut ac = a.to_vec();
    let mut bc = b.to_vec();
    center(&mut ac);
    center(&mut bc);
    let denom = norm(&ac) * norm(&bc);
    if denom == 0.0 {
        return 0.0;
    }
    dot(&ac, &bc) / denom
}

/// Fits a logistic regression on the usable columns and builds the point
/// scales. Collinear columns (pairwise correlation or rank deficiency)
/// are dropped later-index-first with a recorded reason; `manual_exclusions`
/// are honored before fitting.
pub fn fit_nomogram(
    x: &Matrix,
    y: &[u8],
    names: &[String],
    manual_exclusions: &[usize],
) -> Result<NomogramSpec> {
    if names.len() != x.cols() {
        return Err(Error::Config("fit_nomogram: name/column count mismatch".into()));
    }
    let mut excluded: Vec<ExcludedFeature> = manual_exclusions
        .iter()
        .map(|&index| {
            names
                .get(index)
                .map(|name| ExcludedFeature {
                    index,
                    name: name.clone(),
                    reason: ExclusionReason::Manual,
                })
                .ok_or_else(|| Error::Config(format!("manual exclusion {index} out of range")))
        })
        .collect::<Result<_>>()?;

    let mut usable: Vec<usize> =
        (0..x.cols()).filter(|c| !manual_exclusions.contains(c)).collect();

    // pairwise |correlation| screen, later-indexed offender dropped
    let mut drop = Vec::new();
    for (ai, &a) in usable.iter().enumerate() {
        if drop.contains(&a) {
            continue;
        }
        for &b in usable.iter().skip(ai + 1) {
            if drop.contains(&b) {
                continue;
            }
            if correlation(&x.col(a), &x.col(b)).abs() > COLLINEARITY_CORRELATION {
                drop.push(b);
            }
        }
    }
    // rank-deficiency screen via Gram-Schmidt residuals
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let survivors: Vec<usize> =
        usable.iter().filter(|c| !drop.contains(c)).copied().collect();
    for c in survivors {
        let mut v = x.col(c);
        center(&mut v);
        let original_norm = norm(&v).max(1e-300);
        for b in &basis {
            let proj = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        if norm(&v) / original_norm < RANK_EPS {
            drop.push(c);
        } else {
            let n = norm(&v);
            if n > 0.0 {
                v.iter_mut().for_each(|vi| *vi /= n);
                basis.push(v);
            }
        }
    }
    drop.sort_unstable();
    drop.dedup();
    for &index in &drop {
        excluded.push(ExcludedFeature {
            index,
            name: names[index].clone(),
            reason: ExclusionReason::Collinear,
        });
    }
    usable.retain(|c| !drop.contains(c));
    if usable.len() < 2 {
        return Err(Error::Data(format!(
            "fit_nomogram: only {} usable feature(s) after exclusions; need at least 2",
            usable.len()
        )));
    }

    let design = x.select_cols(&usable);
    let model = fit_linear(&design, y, LinearKind::LogisticRegression)?;

    // per-feature ranges and spans; the points unit makes the widest
    // feature span exactly MAX_POINTS
    let mut lo = vec![f64::INFINITY; usable.len()];
    let mut hi = vec![f64::NEG_INFINITY; usable.len()];
    for r in 0..design.rows() {
        for (j, &v) in design.row(r).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let widest = usable
        .iter()
        .enumerate()
        .map(|(j, _)| model.weights[j].abs() * (hi[j] - lo[j]))
        .fold(0.0, f64::max);
    if widest <= 0.0 {
        return Err(Error::Numeric(
            "fit_nomogram: degenerate fit (all coefficients or ranges zero)".into(),
        ));
    }
    let points_unit = widest / MAX_POINTS;

    let features: Vec<NomogramFeature> = usable
        .iter()
        .enumerate()
        .map(|(j, &index)| NomogramFeature {
            index,
            name: names[index].clone(),
            coefficient: model.weights[j],
            lo: lo[j],
            hi: hi[j],
            max_points: model.weights[j].abs() * (hi[j] - lo[j]) / points_unit,
        })
        .collect();

    // linear predictor = u * total_points + (intercept + sum beta * ref)
    // where ref is lo for positive coefficients and hi for negative ones
    let offset: f64 = features
        .iter()
        .map(|f| f.coefficient * if f.coefficient >= 0.0 { f.lo } else { f.hi })
        .sum();
    Ok(NomogramSpec {
        features,
        intercept: model.bias,
        points_unit,
        map_a: points_unit,
        map_b: model.bias + offset,
        excluded,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub per_feature_points: Vec<f64>,
    pub total: f64,
    /// Features scored outside their reference range (extrapolated).
    pub out_of_range: Vec<String>,
}

impl NomogramSpec {
    /// Points for one row of the *included* features, in spec order.
    /// Out-of-range values extrapolate with a warning entry.
    pub fn score(&self, x: &[f64]) -> Result<ScoreBreakdown> {
        if x.len() != self.features.len() {
            return Err(Error::Data(format!(
                "score: expected {} feature values, got {}",
                self.features.len(),
                x.len()
            )));
        }
        let mut per_feature_points = Vec::with_capacity(x.len());
        let mut out_of_range = Vec::new();
        for (f, &v) in self.features.iter().zip(x) {
            if v < f.lo || v > f.hi {
                out_of_range.push(f.name.clone());
            }
            let oriented = if f.coefficient >= 0.0 { v - f.lo } else { f.hi - v };
            per_feature_points.push(f.coefficient.abs() * oriented / self.points_unit);
        }
        Ok(ScoreBreakdown {
            total: per_feature_points.iter().sum(),
            per_feature_points,
            out_of_range,
        })
    }

    /// Event probability for a total score: sigmoid(a * total + b).
    pub fn probability_of_score(&self, total: f64) -> f64 {
        sigmoid(self.map_a * total + self.map_b)
    }

    /// The raw logistic model's probability, for identity checks.
    pub fn probability_direct(&self, x: &[f64]) -> f64 {
        let z = self.intercept
            + self
                .features
                .iter()
                .zip(x)
                .map(|(f, &v)| f.coefficient * v)
                .sum::<f64>();
        sigmoid(z)
    }

    /// Total score at which the probability crosses one half.
    pub fn midpoint_score(&self) -> f64 {
        -self.map_b / self.map_a
    }

    /// Values of the included features from a full-width row.
    pub fn project_row(&self, full_row: &[f64]) -> Vec<f64> {
        self.features.iter().map(|f| full_row[f.index]).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub mean_predicted: f64,
    pub observed_rate: f64,
    pub count: usize,
}

/// Equal-width calibration bins over [0, 1]; empty bins are emitted with
/// count 0 (probability 1.0 lands in the last bin).
pub fn calibration_curve(probs: &[f64], y: &[u8], bins: usize) -> Result<Vec<CalibrationBin>> {
    if probs.len() != y.len() {
        return Err(Error::Data("calibration_curve: length mismatch".into()));
    }
    if bins == 0 {
        return Err(Error::Config("calibration_curve: need at least one bin".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Data("calibration_curve: probabilities must be in [0,1]".into()));
    }
    let mut sums = vec![0.0; bins];
    let mut events = vec![0usize; bins];
    let mut counts = vec![0usize; bins];
    for (&p, &label) in probs.iter().zip(y) {
        let b = ((p * bins as f64) as usize).min(bins - 1);
        sums[b] += p;
        events[b] += label as usize;
        counts[b] += 1;
    }
    Ok((0..bins)
        .map(|b| CalibrationBin {
            lo: b as f64 / bins as f64,
            hi: (b + 1) as f64 / bins as f64,
            mean_predicted: if counts[b] > 0 { sums[b] / counts[b] as f64 } else { 0.0 },
            observed_rate: if counts[b] > 0 {
                events[b] as f64 / counts[b] as f64
            } else {
                0.0
            },
            count: counts[b],
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetBenefitPoint {
    pub threshold: f64,
    pub model: f64,
    pub treat_all: f64,
    /// Identically zero; carried so the emitted series is self-contained.
    pub treat_none: f64,
}

/// Decision-curve analysis: net benefit of the model against treat-all
/// and treat-none policies. Positive prediction means prob >= threshold.
pub fn decision_curve(
    probs: &[f64],
    y: &[u8],
    thresholds: &[f64],
) -> Result<Vec<NetBenefitPoint>> {
    if probs.len() != y.len() {
        return Err(Error::Data("decision_curve: length mismatch".into()));
    }
    if thresholds.iter().any(|t| !(0.0 < *t && *t < 1.0)) {
        return Err(Error::Config("decision_curve: thresholds must lie in (0, 1)".into()));
    }
    let n = probs.len() as f64;
    let prevalence = y.iter().filter(|&&l| l == 1).count() as f64 / n;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let mut tp = 0.0;
            let mut fp = 0.0;
            for (&p, &label) in probs.iter().zip(y) {
                if p >= t {
                    if label == 1 {
                        tp += 1.0;
                    } else {
                        fp += 1.0;
                    }
                }
            }
            let odds = t / (1.0 - t);
            NetBenefitPoint {
                threshold: t,
                model: tp / n - fp / n * odds,
                treat_all: prevalence - (1.0 - prevalence) * odds,
                treat_none: 0.0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn risk_data(n: usize, seed: u64) -> (Matrix, Vec<u8>, Vec<String>) {
        let mut rng = Rng::from_seed(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a = rng.normal();
            let b = rng.normal();
            let c = rng.normal();
            let z = 1.5 * a - 2.0 * b + 0.5 * c - 0.2;
            let label = (rng.uniform() < sigmoid(z)) as u8;
            rows.push(vec![a, b, c]);
            y.push(label);
        }
        let names = vec!["f0".to_string(), "f1".to_string(), "f2".to_string()];
        (Matrix::from_rows(&rows), y, names)
    }

    #[test]
    fn duplicated_column_triggers_exactly_one_collinear_exclusion() {
        let (x, y, _) = risk_data(200, 1);
        let dup = x.hstack(&x.select_cols(&[0]));
        let names: Vec<String> =
            ["f0", "f1", "f2", "f0_copy"].iter().map(|s| s.to_string()).collect();
        let spec = fit_nomogram(&dup, &y, &names, &[]).unwrap();
        let collinear: Vec<_> = spec
            .excluded
            .iter()
            .filter(|e| e.reason == ExclusionReason::Collinear)
            .collect();
        assert_eq!(collinear.len(), 1);
        assert_eq!(collinear[0].index, 3); // later-indexed offender dropped
        assert_eq!(spec.features.len(), 3);
    }

    #[test]
    fn manual_exclusions_honored_and_reported() {
        let (x, y, names) = risk_data(150, 2);
        let spec = fit_nomogram(&x, &y, &names, &[2]).unwrap();
        assert_eq!(spec.features.len(), 2);
        assert!(spec
            .excluded
            .iter()
            .any(|e| e.index == 2 && e.reason == ExclusionReason::Manual));
    }

    #[test]
    fn widest_feature_spans_exactly_max_points() {
        let (x, y, names) = risk_data(150, 3);
        let spec = fit_nomogram(&x, &y, &names, &[]).unwrap();
        let widest = spec.features.iter().map(|f| f.max_points).fold(0.0, f64::max);
        assert!((widest - MAX_POINTS).abs() < 1e-9);
        for f in &spec.features {
            assert!(f.max_points >= 0.0);
        }
    }

    #[test]
    fn low_risk_reference_row_scores_zero() {
        let (x, y, names) = risk_data(150, 4);
        let spec = fit_nomogram(&x, &y, &names, &[]).unwrap();
        let reference: Vec<f64> = spec
            .features
            .iter()
            .map(|f| if f.coefficient >= 0.0 { f.lo } else { f.hi })
            .collect();
        let score = spec.score(&reference).unwrap();
        assert!(score.total.abs() < 1e-9);
        assert!(score.out_of_range.is_empty());
    }

    #[test]
    fn probability_at_midpoint_is_exactly_half() {
        let (x, y, names) = risk_data(150, 5);
        let spec = fit_nomogram(&x, &y, &names, &[]).unwrap();
        let p = spec.probability_of_score(spec.midpoint_score());
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn probability_strictly_increases_with_total() {
        let (x, y, names) = risk_data(150, 6);
        let spec = fit_nomogram(&x, &y, &names, &[]).unwrap();
        let mut last = 0.0;
        for i in 0..50 {
            let p = spec.probability_of_score(i as f64 * 0.5);
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn points_system_is_exact_reparameterization() {
        let (x, y, names) = risk_data(300, 7);
        let spec = fit_nomogram(&x, &y, &names, &[]).unwrap();
        let mut rng = Rng::from_seed(8);
        for _ in 0..1000 {
            let row: Vec<f64> = spec
                .features
                .iter()
                .map(|f| rng.uniform_in(f.lo, f.hi))
                .collect();
            let total = spec.score(&row).unwrap().total;
            let via_points = spec.probability_of_score(total);
            let direct = spec.probability_direct(&row);
            assert!(
                (via_points - direct).abs() < 1e-9,
                "points {via_points} vs direct {direct}"
            );
        }
    }

    #[test]
    fn per_feature_points_nonnegative_and_monotone_in_risk() {
        let (x, y, names) = risk_data(200, 14);
        let spec = fit_nomogram(&x, &y, &names, &[]).unwrap();
        for (j, f) in spec.features.iter().enumerate() {
            let base: Vec<f64> = spec.features.iter().map(|g| (g.lo + g.hi) / 2.0).collect();
            let mut low_row = base.clone();
            let mut high_row = base.clone();
            low_row[j] = f.lo;
            high_row[j] = f.hi;
            let p_low = spec.score(&low_row).unwrap().per_feature_points[j];
            let p_high = spec.score(&high_row).unwrap().per_feature_points[j];
            assert!(p_low >= -1e-12 && p_high >= -1e-12);
            // the riskier end (by coefficient sign) carries more points
            let riskier = if f.coefficient >= 0.0 { p_high } else { p_low };
            let safer = if f.coefficient >= 0.0 { p_low } else { p_high };
            assert!(riskier >= safer);
            assert!((riskier - f.max_points).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_range_scores_extrapolate_with_warning() {
        let (x, y, names) = risk_data(150, 9);
        let spec = fit_nomogram(&x, &y, &names, &[]).unwrap();
        let mut row: Vec<f64> = spec.features.iter().map(|f| f.lo).collect();
        row[0] = spec.features[0].hi + 10.0;
        let score = spec.score(&row).unwrap();
        assert_eq!(score.out_of_range, vec![spec.features[0].name.clone()]);
        assert!(score.total.is_finite());
    }

    #[test]
    fn too_few_usable_features_errors() {
        let (x, y, names) = risk_data(100, 10);
        assert!(fit_nomogram(&x, &y, &names, &[0, 1]).is_err());
    }

    #[test]
    fn calibration_single_bin_occupied() {
        let bins = calibration_curve(&[1.0, 1.0, 1.0], &[1, 1, 1], 10).unwrap();
        assert_eq!(bins.len(), 10);
        let occupied: Vec<_> = bins.iter().filter(|b| b.count > 0).collect();
        assert_eq!(occupied.len(), 1);
        assert_eq!(occupied[0].observed_rate, 1.0);
        assert_eq!(occupied[0].count, 3);
    }

    #[test]
    fn calibration_counts_sum_to_n() {
        let mut rng = Rng::from_seed(11);
        let probs: Vec<f64> = (0..500).map(|_| rng.uniform()).collect();
        let y: Vec<u8> = probs.iter().map(|&p| (rng.uniform() < p) as u8).collect();
        let bins = calibration_curve(&probs, &y, 10).unwrap();
        let total: usize = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, 500);
    }

    #[test]
    fn well_calibrated_bernoulli_data_stays_near_diagonal() {
        for seed in 0..5 {
            let mut rng = Rng::from_seed(1000 + seed);
            let probs: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
            let y: Vec<u8> = probs.iter().map(|&p| (rng.uniform() < p) as u8).collect();
            let bins = calibration_curve(&probs, &y, 10).unwrap();
            for b in bins.iter().filter(|b| b.count > 0) {
                assert!(
                    (b.observed_rate - b.mean_predicted).abs() < 0.05,
                    "seed {seed}: bin [{}, {}) observed {} predicted {}",
                    b.lo,
                    b.hi,
                    b.observed_rate,
                    b.mean_predicted
                );
            }
        }
    }

    #[test]
    fn decision_curve_limits_and_policies() {
        let mut rng = Rng::from_seed(12);
        let y: Vec<u8> = (0..400).map(|_| (rng.uniform() < 0.3) as u8).collect();
        let prevalence = y.iter().filter(|&&l| l == 1).count() as f64 / 400.0;

        // a model that predicts everything positive approaches the
        // prevalence as t -> 0+
        let all_positive = vec![1.0; 400];
        let points = decision_curve(&all_positive, &y, &[0.001, 0.5]).unwrap();
        assert!((points[0].model - prevalence).abs() < 0.01);
        assert!(points.iter().all(|p| p.treat_none == 0.0));

        // perfect classifier: NB(t) = prevalence for every t < 1
        let perfect: Vec<f64> = y.iter().map(|&l| l as f64).collect();
        let points =
            decision_curve(&perfect, &y, &[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        for p in &points {
            assert!((p.model - prevalence).abs() < 1e-12, "t {}: {}", p.threshold, p.model);
        }
    }

    #[test]
    fn model_never_beats_perfect_classifier() {
        let mut rng = Rng::from_seed(13);
        let probs: Vec<f64> = (0..300).map(|_| rng.uniform()).collect();
        let y: Vec<u8> = probs.iter().map(|&p| (rng.uniform() < p) as u8).collect();
        let perfect: Vec<f64> = y.iter().map(|&l| l as f64).collect();
        let thresholds: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let model_curve = decision_curve(&probs, &y, &thresholds).unwrap();
        let perfect_curve = decision_curve(&perfect, &y, &thresholds).unwrap();
        for (m, p) in model_curve.iter().zip(&perfect_curve) {
            assert!(m.model <= p.model + 1e-12);
        }
    }

    #[test]
    fn decision_curve_rejects_bad_thresholds() {
        assert!(decision_curve(&[0.5], &[1], &[0.0]).is_err());
        assert!(decision_curve(&[0.5], &[1], &[1.0]).is_err());
    }
}
