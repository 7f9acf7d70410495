//! Statistical characterization of a dataset against its binary label:
//! per-feature summaries, normality screening, chi-square, two-sample t,
//! and Wilcoxon rank-sum tests with p-values.

pub mod special;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use special::{chi_square_sf, normal_cdf, t_sf_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    ChiSquare,
    TTest,
    RankSum,
    Normality,
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TestKind::ChiSquare => "Chi-square test",
            TestKind::TTest => "T-test",
            TestKind::RankSum => "Rank-sum test",
            TestKind::Normality => "Normality test",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom where applicable (chi-square, t).
    pub df: Option<f64>,
    /// Total sample count that entered the test.
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample (n-1) standard deviation.
    pub std: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// Summary statistics of a non-empty vector. Quartiles use linear
/// interpolation between order statistics (type-7), the convention the
/// quartile columns of the report depend on.
pub fn describe(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::Data("describe: empty vector".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SummaryStats {
        mean,
        std,
        median: quantile_type7(&sorted, 0.5),
        q1: quantile_type7(&sorted, 0.25),
        q3: quantile_type7(&sorted, 0.75),
        min: sorted[0],
        max: sorted[n - 1],
        n,
    })
}

fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pearson chi-square on a 2 x K count table, no continuity correction.
/// df = K - 1; p from the upper regularized incomplete gamma.
pub fn chi_square(table: &[Vec<f64>]) -> Result<TestResult> {
    if table.len() != 2 || table[0].is_empty() || table[0].len() != table[1].len() {
        return Err(Error::Data("chi_square: table must be 2 x K with K >= 1".into()));
    }
    let k = table[0].len();
    if table.iter().flatten().any(|&c| c < 0.0) {
        return Err(Error::Data("chi_square: negative count".into()));
    }
    let row_totals: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<f64> = (0..k).map(|c| table[0][c] + table[1][c]).collect();
    if row_totals.iter().chain(&col_totals).any(|&t| t <= 0.0) {
        return Err(Error::Data("chi_square: zero marginal total".into()));
    }
    let grand: f64 = row_totals.iter().sum();
    let mut stat = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &obs) in row.iter().enumerate() {
            let expected = row_totals[r] * col_totals[c] / grand;
            let d = obs - expected;
            stat += d * d / expected;
        }
    }
    let df = (k - 1) as f64;
    Ok(TestResult {
        kind: TestKind::ChiSquare,
        statistic: stat,
        p_value: chi_square_sf(stat, df),
        df: Some(df),
        n: grand as usize,
    })
}

/// Two-sample pooled-variance Student's t. The statistic carries the sign
/// of mean(b) - mean(a); two-sided p via the incomplete beta.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Data("t_test: each sample needs >= 2 values".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let ssa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let ssb: f64 = b.iter().map(|x| (x - mb) * (x - mb)).sum();
    let df = na + nb - 2.0;
    let pooled = (ssa + ssb) / df;
    if pooled <= 0.0 {
        if ma == mb {
            // identical constant samples: no evidence of difference
            return Ok(TestResult {
                kind: TestKind::TTest,
                statistic: 0.0,
                p_value: 1.0,
                df: Some(df),
                n: a.len() + b.len(),
            });
        }
        return Err(Error::Numeric("t_test: zero pooled variance".into()));
    }
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let t = (mb - ma) / se;
    Ok(TestResult {
        kind: TestKind::TTest,
        statistic: t,
        p_value: t_sf_two_sided(t, df),
        df: Some(df),
        n: a.len() + b.len(),
    })
}

/// Wilcoxon rank-sum z statistic via the normal approximation with
/// midranks and tie-corrected variance, no continuity correction. The
/// statistic is computed on the first sample's rank sum.
pub fn rank_sum(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("rank_sum: both samples must be non-empty".into()));
    }
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let n = n1 + n2;
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    // midranks plus tie-group bookkeeping
    let mut w = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let count = (j - i) as f64;
        let midrank = (i + 1 + j) as f64 / 2.0;
        for item in &pooled[i..j] {
            if item.1 {
                w += midrank;
            }
        }
        tie_term += count * count * count - count;
        i = j;
    }

    let expected = n1 * (n + 1.0) / 2.0;
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let (z, p) = if variance <= 0.0 {
        (0.0, 1.0) // every pooled value identical
    } else {
        let z = (w - expected) / variance.sqrt();
        (z, 2.0 * normal_cdf(-z.abs()))
    };
    Ok(TestResult {
        kind: TestKind::RankSum,
        statistic: z,
        p_value: p.min(1.0),
        df: None,
        n: pooled.len(),
    })
}

/// D'Agostino-Pearson K^2 omnibus normality test (combined skewness and
/// kurtosis z-scores); p from chi-square with df = 2. Requires n >= 20.
pub fn normality(values: &[f64]) -> Result<TestResult> {
    let n = values.len();
    if n < 20 {
        return Err(Error::Data(format!("normality: need n >= 20, got {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    if m2 == 0.0 {
        return Ok(TestResult {
            kind: TestKind::Normality,
            statistic: 0.0,
            p_value: 1.0,
            df: Some(2.0),
            n,
        });
    }
    let m3 = values.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let b1 = m3 / m2.powf(1.5);
    let b2 = m4 / (m2 * m2);

    // skewness transform (D'Agostino 1970)
    let y = b1 * (((nf + 1.0) * (nf + 3.0)) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let ya = y / alpha;
    let z1 = delta * (ya + (ya * ya + 1.0).sqrt()).ln();

    // kurtosis transform (Anscombe-Glynn 1983)
    let e_b2 = 3.0 * (nf - 1.0) / (nf + 1.0);
    let var_b2 =
        24.0 * nf * (nf - 2.0) * (nf - 3.0) / ((nf + 1.0).powi(2) * (nf + 3.0) * (nf + 5.0));
    let x = (b2 - e_b2) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
        * (6.0 * (nf + 3.0) * (nf + 5.0) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let mut denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    if denom == 0.0 {
        denom = 1e-12;
    }
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    let z2 = (term1 - term2) / (2.0 / (9.0 * a)).sqrt();

    let k2 = z1 * z1 + z2 * z2;
    Ok(TestResult {
        kind: TestKind::Normality,
        statistic: k2,
        p_value: chi_square_sf(k2, 2.0),
        df: Some(2.0),
        n,
    })
}

/// Per-class breakdown of a single category value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryLine {
    pub category: String,
    pub positive_count: usize,
    pub negative_count: usize,
    pub positive_pct: f64,
    pub negative_pct: f64,
    pub total_count: usize,
    pub total_pct: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureSummary {
    Numeric {
        positive: SummaryStats,
        negative: SummaryStats,
        total: SummaryStats,
    },
    Categorical { lines: Vec<CategoryLine> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociationRow {
    pub feature: String,
    pub chosen_test: TestKind,
    pub result: TestResult,
    /// The normality screen that routed a numeric feature, when one ran.
    pub normality: Option<TestResult>,
    pub summary: FeatureSummary,
}

/// Significance level of the normality screen that routes numeric
/// features between the t and rank-sum tests.
pub const NORMALITY_ALPHA: f64 = 0.05;

/// Builds the per-feature association report against the binary label.
/// Categorical features get a chi-square on the 2 x K contingency table;
/// numeric features are screened for normality and routed to the t-test
/// (normal) or the rank-sum test (non-normal). Group order inside the
/// tests follows the label-0-first convention of the report layout, so
/// statistics are signed as (negative-class vs positive-class).
pub fn association_table(ds: &Dataset) -> Result<Vec<AssociationRow>> {
    let pos_rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.labels[r] == 1).collect();
    let neg_rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.labels[r] == 0).collect();

    let mut rows = Vec::new();
    let mut numeric_idx = 0usize;
    let mut categorical_idx = 0usize;
    for col in &ds.schema.columns {
        match col.kind {
            ColumnKind::Label | ColumnKind::Weight => continue,
            ColumnKind::Numeric => {
                let values = ds.numeric.col(numeric_idx);
                numeric_idx += 1;
                let pos: Vec<f64> = pos_rows.iter().map(|&r| values[r]).collect();
                let neg: Vec<f64> = neg_rows.iter().map(|&r| values[r]).collect();
                let screen = normality(&values)?;
                let (chosen, result) = if screen.p_value > NORMALITY_ALPHA {
                    (TestKind::TTest, t_test(&pos, &neg)?)
                } else {
                    (TestKind::RankSum, rank_sum(&neg, &pos)?)
                };
                rows.push(AssociationRow {
                    feature: col.name.clone(),
                    chosen_test: chosen,
                    result,
                    normality: Some(screen),
                    summary: FeatureSummary::Numeric {
                        positive: describe(&pos)?,
                        negative: describe(&neg)?,
                        total: describe(&values)?,
                    },
                });
            }
            ColumnKind::Categorical => {
                let cats = col.categories.as_ref().expect("validated schema");
                let codes = ds.categorical_col(categorical_idx);
                categorical_idx += 1;
                // observed categories only; the missing slot joins as its
                // own column when present so marginals stay positive
                let n_slots = cats.len() + 1;
                let mut counts = vec![vec![0.0; n_slots]; 2];
                for (r, &code) in codes.iter().enumerate() {
                    counts[ds.labels[r] as usize][code as usize] += 1.0;
                }
                let keep: Vec<usize> = (0..n_slots)
                    .filter(|&c| counts[0][c] + counts[1][c] > 0.0)
                    .collect();
                let table: Vec<Vec<f64>> = vec![
                    keep.iter().map(|&c| counts[1][c]).collect(),
                    keep.iter().map(|&c| counts[0][c]).collect(),
                ];
                let result = chi_square(&table)?;
                let npos = pos_rows.len().max(1) as f64;
                let nneg = neg_rows.len().max(1) as f64;
                let total = ds.n_rows().max(1) as f64;
                let lines = keep
                    .iter()
                    .map(|&c| {
                        let name = if c == cats.len() {
                            "(missing)".to_string()
                        } else {
                            cats[c].clone()
                        };
                        let p = counts[1][c];
                        let n = counts[0][c];
                        CategoryLine {
                            category: name,
                            positive_count: p as usize,
                            negative_count: n as usize,
                            positive_pct: 100.0 * p / npos,
                            negative_pct: 100.0 * n / nneg,
                            total_count: (p + n) as usize,
                            total_pct: 100.0 * (p + n) / total,
                        }
                    })
                    .collect();
                rows.push(AssociationRow {
                    feature: col.name.clone(),
                    chosen_test: TestKind::ChiSquare,
                    result,
                    normality: None,
                    summary: FeatureSummary::Categorical { lines },
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn describe_singleton() {
        let s = describe(&[5.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.median, 5.0);
        assert_eq!(s.q1, 5.0);
        assert_eq!(s.q3, 5.0);
        assert_eq!(s.min, 5.0);
        assert_eq!(s.max, 5.0);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn describe_four_values() {
        let s = describe(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.q1, 1.75); // type-7 interpolation
        assert_eq!(s.q3, 3.25);
    }

    #[test]
    fn describe_empty_errors() {
        assert!(describe(&[]).is_err());
    }

    #[test]
    fn chi_square_identical_rows_is_zero() {
        let r = chi_square(&[vec![10.0, 20.0, 30.0], vec![10.0, 20.0, 30.0]]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chi_square_gender_table() {
        let r = chi_square(&[vec![548.0, 67.0], vec![349.0, 209.0]]).unwrap();
        assert!((r.statistic - 114.707).abs() < 0.05, "stat {}", r.statistic);
        assert!(r.p_value < 0.001);
        assert_eq!(r.df, Some(1.0));
    }

    #[test]
    fn chi_square_fasting_blood_sugar_table() {
        let r = chi_square(&[vec![182.0, 433.0], vec![67.0, 491.0]]).unwrap();
        assert!((r.statistic - 54.11).abs() < 0.05, "stat {}", r.statistic);
    }

    #[test]
    fn chi_square_zero_marginal_errors() {
        assert!(chi_square(&[vec![0.0, 5.0], vec![0.0, 7.0]]).is_err());
    }

    #[test]
    fn chi_square_column_permutation_and_row_swap_invariant() {
        let t1 = chi_square(&[vec![5.0, 9.0, 2.0], vec![3.0, 4.0, 8.0]]).unwrap();
        let t2 = chi_square(&[vec![2.0, 5.0, 9.0], vec![8.0, 3.0, 4.0]]).unwrap();
        let t3 = chi_square(&[vec![3.0, 4.0, 8.0], vec![5.0, 9.0, 2.0]]).unwrap();
        assert!((t1.statistic - t2.statistic).abs() < 1e-12);
        assert!((t1.statistic - t3.statistic).abs() < 1e-12);
    }

    #[test]
    fn t_test_hand_computed() {
        let r = t_test(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]).unwrap();
        // pooled s^2 = 10/6, se = sqrt(s^2 * 1/2), t = 2/se
        assert!((r.statistic - 2.1909).abs() < 1e-4, "t {}", r.statistic);
        assert_eq!(r.df, Some(6.0));
    }

    #[test]
    fn t_test_identical_samples() {
        let r = t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_test_sign_flips_on_swap() {
        let a = [1.0, 2.0, 3.0];
        let b = [4.0, 5.0, 7.0];
        let ab = t_test(&a, &b).unwrap().statistic;
        let ba = t_test(&b, &a).unwrap().statistic;
        assert!((ab + ba).abs() < 1e-12);
    }

    #[test]
    fn t_test_location_and_scale_invariance() {
        let a = [1.0, 2.0, 3.0, 5.0];
        let b = [2.0, 4.0, 4.0, 9.0];
        let base = t_test(&a, &b).unwrap().statistic;
        let shift =
            t_test(&a.map(|x| x + 10.0), &b.map(|x| x + 10.0)).unwrap().statistic;
        let scaled = t_test(&a.map(|x| x * 3.0), &b.map(|x| x * 3.0)).unwrap().statistic;
        assert!((base - shift).abs() < 1e-10);
        assert!((base - scaled).abs() < 1e-10);
    }

    #[test]
    fn rank_sum_hand_computed() {
        let r = rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        // W = 3, E[W] = 5, Var = 5/3
        assert!((r.statistic - (-1.549_193_338)).abs() < 1e-6, "z {}", r.statistic);
    }

    #[test]
    fn rank_sum_identical_samples() {
        let r = rank_sum(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn rank_sum_monotone_transform_invariant() {
        let a = [0.5, 1.5, 4.0, 9.0];
        let b = [1.0, 2.5, 3.0, 16.0];
        let base = rank_sum(&a, &b).unwrap().statistic;
        let exp = rank_sum(&a.map(f64::exp), &b.map(f64::exp)).unwrap().statistic;
        let cube = rank_sum(&a.map(|x| x.powi(3)), &b.map(|x| x.powi(3))).unwrap().statistic;
        assert!((base - exp).abs() < 1e-12);
        assert!((base - cube).abs() < 1e-12);
    }

    /// Exact enumeration oracle: mean and variance of the rank-sum
    /// distribution over all C(N, n1) group assignments of the midranks.
    fn enumerated_mean_var(a: &[f64], b: &[f64]) -> (f64, f64) {
        let pooled: Vec<f64> = a.iter().chain(b.iter()).cloned().collect();
        let n = pooled.len();
        let mut sorted = pooled.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let midrank = |v: f64| -> f64 {
            let lo = sorted.iter().filter(|&&s| s < v).count();
            let eq = sorted.iter().filter(|&&s| s == v).count();
            (2 * lo + eq + 1) as f64 / 2.0
        };
        let ranks: Vec<f64> = pooled.iter().map(|&v| midrank(v)).collect();
        let n1 = a.len();
        let mut sums = Vec::new();
        // enumerate all n1-subsets of 0..n by bitmask
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            sums.push(w);
        }
        let m = sums.iter().sum::<f64>() / sums.len() as f64;
        let v = sums.iter().map(|w| (w - m) * (w - m)).sum::<f64>() / sums.len() as f64;
        (m, v)
    }

    #[test]
    fn rank_sum_moments_match_exact_enumeration() {
        let cases: &[(&[f64], &[f64])] = &[
            (&[1.0, 2.0], &[3.0, 4.0]),
            (&[1.0, 5.0, 2.0], &[3.0, 4.0]),
            (&[1.0, 1.0, 2.0], &[2.0, 3.0, 3.0]), // ties
            (&[7.0, 3.0, 5.0, 1.0], &[2.0, 4.0, 6.0, 8.0]),
        ];
        for (a, b) in cases {
            let (em, ev) = enumerated_mean_var(a, b);
            let n1 = a.len() as f64;
            let n2 = b.len() as f64;
            let n = n1 + n2;
            let formula_mean = n1 * (n + 1.0) / 2.0;
            // recompute the tie-corrected variance the implementation uses
            let mut pooled: Vec<f64> = a.iter().chain(b.iter()).cloned().collect();
            pooled.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let mut tie = 0.0;
            let mut i = 0;
            while i < pooled.len() {
                let mut j = i;
                while j < pooled.len() && pooled[j] == pooled[i] {
                    j += 1;
                }
                let t = (j - i) as f64;
                tie += t * t * t - t;
                i = j;
            }
            let formula_var = n1 * n2 / 12.0 * ((n + 1.0) - tie / (n * (n - 1.0)));
            assert!((em - formula_mean).abs() < 1e-9, "mean {em} vs {formula_mean}");
            assert!((ev - formula_var).abs() < 1e-9, "var {ev} vs {formula_var}");
        }
    }

    #[test]
    fn normality_accepts_gaussian_rejects_lognormal() {
        let mut accept = 0;
        let mut reject_lognormal = 0;
        for seed in 0..100 {
            let mut rng = Rng::from_seed(1000 + seed);
            let draws: Vec<f64> = (0..1000).map(|_| rng.normal()).collect();
            if normality(&draws).unwrap().p_value > 0.05 {
                accept += 1;
            }
            let logn: Vec<f64> = draws.iter().map(|z| z.exp()).collect();
            if normality(&logn).unwrap().p_value < 0.001 {
                reject_lognormal += 1;
            }
        }
        assert!(accept >= 90, "accepted {accept}/100 gaussian draws");
        assert_eq!(reject_lognormal, 100);
    }

    #[test]
    fn normality_constant_plus_tiny_noise_is_finite() {
        let values: Vec<f64> = (0..50)
            .map(|i| 5.0 + if i % 2 == 0 { 1e-9 } else { -1e-9 })
            .collect();
        let r = normality(&values).unwrap();
        assert!(r.statistic.is_finite());
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn normality_needs_twenty() {
        assert!(normality(&[1.0; 19]).is_err());
    }

    #[test]
    fn describe_order_statistics_are_ordered() {
        let mut rng = Rng::from_seed(21);
        for _ in 0..50 {
            let n = 1 + rng.below(40);
            let values: Vec<f64> = (0..n).map(|_| rng.normal() * 10.0).collect();
            let s = describe(&values).unwrap();
            assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        }
    }

    #[test]
    fn association_routes_categorical_to_chi_square() {
        let ds = crate::fixture::generate_dataset(400, 31).unwrap();
        let rows = association_table(&ds).unwrap();
        // eleven features, label excluded
        assert_eq!(rows.len(), 11);
        assert!(rows.iter().all(|r| r.feature != "HeartDisease"));
        let sex = rows.iter().find(|r| r.feature == "Sex").unwrap();
        assert_eq!(sex.chosen_test, TestKind::ChiSquare);
        assert!(sex.normality.is_none());
        let age = rows.iter().find(|r| r.feature == "Age").unwrap();
        assert!(matches!(age.chosen_test, TestKind::TTest | TestKind::RankSum));
        assert!(age.normality.is_some());
        match &age.summary {
            FeatureSummary::Numeric { positive, negative, total } => {
                assert!(positive.mean > negative.mean); // older positives
                assert_eq!(total.n, 400);
            }
            _ => panic!("age should carry numeric summaries"),
        }
    }

    #[test]
    fn association_strong_features_have_tiny_p_values() {
        let ds = crate::fixture::generate_dataset(600, 32).unwrap();
        let rows = association_table(&ds).unwrap();
        let slope = rows.iter().find(|r| r.feature == "ST_Slope").unwrap();
        assert!(slope.result.p_value < 0.001);
        let angina = rows.iter().find(|r| r.feature == "ExerciseAngina").unwrap();
        assert!(angina.result.p_value < 0.001);
    }

    /// Monte-Carlo oracle: a numeric column independent of the label is
    /// usually insignificant.
    #[test]
    fn association_independent_noise_is_usually_insignificant() {
        use crate::data::{ColumnSpec, Dataset, Schema};
        use crate::numerics::Matrix;
        let mut insignificant = 0;
        let trials = 40;
        for seed in 0..trials {
            let mut rng = Rng::from_seed(500 + seed);
            let n = 120;
            let numeric: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            let schema =
                Schema::new(vec![ColumnSpec::numeric("noise"), ColumnSpec::label("y")]).unwrap();
            let ds = Dataset::new(
                schema,
                Matrix::from_vec(n, 1, numeric),
                vec![],
                labels,
                None,
            )
            .unwrap();
            let rows = association_table(&ds).unwrap();
            if rows[0].result.p_value > 0.05 {
                insignificant += 1;
            }
        }
        assert!(
            insignificant >= trials * 8 / 10,
            "only {insignificant}/{trials} runs were insignificant"
        );
    }
}
