use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig { k_neighbors: 5, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SmoteResult {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub synthetic_count: usize,
    pub warnings: Vec<String>,
}

/// Balances a binary dataset by interpolating synthetic minority rows:
/// each synthetic row is x + u * (neighbor - x) with u ~ Uniform(0, 1)
/// and neighbor drawn from x's k nearest minority rows (Euclidean).
/// Originals are preserved in order; synthetics are appended.
pub fn smote(features: &Matrix, labels: &[u8], cfg: &SmoteConfig) -> Result<SmoteResult> {
    if features.rows() != labels.len() {
        return Err(Error::Data("smote: feature/label length mismatch".into()));
    }
    if cfg.k_neighbors == 0 {
        return Err(Error::Config("smote: k_neighbors must be >= 1".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == neg {
        return Ok(SmoteResult {
            features: features.clone(),
            labels: labels.to_vec(),
            synthetic_count: 0,
            warnings: Vec::new(),
        });
    }
    let minority_label: u8 = if pos < neg { 1 } else { 0 };
    let minority_rows: Vec<usize> = (0..labels.len())
        .filter(|&r| labels[r] == minority_label)
        .collect();
    let minority = minority_rows.len();
    if minority < 2 {
        return Err(Error::Data(format!(
            "smote: minority class {minority_label} has {minority} member(s); need at least 2"
        )));
    }
    let mut warnings = Vec::new();
    let k = if cfg.k_neighbors >= minority {
        warnings.push(format!(
            "smote: k_neighbors {} clamped to {} (minority size {minority})",
            cfg.k_neighbors,
            minority - 1
        ));
        minority - 1
    } else {
        cfg.k_neighbors
    };

    // k nearest minority neighbors per minority row, ties broken by index
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(minority);
    for (i, &ri) in minority_rows.iter().enumerate() {
        let xi = features.row(ri);
        let mut dists: Vec<(f64, usize)> = minority_rows
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, &rj)| {
                let d: f64 = xi
                    .iter()
                    .zip(features.row(rj))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d, j)
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        neighbors.push(dists.into_iter().take(k).map(|(_, j)| j).collect());
    }

    let need = pos.abs_diff(neg);
    let mut rng = Rng::from_seed(cfg.seed);
    let mut out = Matrix::zeros(features.rows() + need, features.cols());
    out.data_mut()[..features.data().len()].copy_from_slice(features.data());
    let mut out_labels = labels.to_vec();
    for s in 0..need {
        let base = rng.below(minority);
        let nb = neighbors[base][rng.below(k)];
        let u = rng.uniform();
        let xa = features.row(minority_rows[base]).to_vec();
        let xb = features.row(minority_rows[nb]);
        let dest = out.row_mut(features.rows() + s);
        for ((d, a), b) in dest.iter_mut().zip(&xa).zip(xb) {
            *d = a + u * (b - a);
        }
        out_labels.push(minority_label);
    }
    Ok(SmoteResult { features: out, labels: out_labels, synthetic_count: need, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(labels: &[u8]) -> (usize, usize) {
        let pos = labels.iter().filter(|&&l| l == 1).count();
        (pos, labels.len() - pos)
    }

    #[test]
    fn balances_paper_counts() {
        // 503 positive / 449 negative in, 503/503 out, total 1006
        let n = 952;
        let mut rng = Rng::from_seed(5);
        let features = Matrix::gaussian(n, 4, 1.0, &mut rng);
        let labels: Vec<u8> = (0..n).map(|i| (i < 503) as u8).collect();
        let result = smote(&features, &labels, &SmoteConfig::default()).unwrap();
        assert_eq!(count(&result.labels), (503, 503));
        assert_eq!(result.labels.len(), 1006);
        assert_eq!(result.synthetic_count, 54);
        // originals preserved in order
        assert_eq!(&result.features.data()[..features.data().len()], features.data());
    }

    #[test]
    fn balanced_input_unchanged() {
        let features = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let labels = vec![0, 1, 0, 1];
        let result = smote(&features, &labels, &SmoteConfig::default()).unwrap();
        assert_eq!(result.features.data(), features.data());
        assert_eq!(result.labels, labels);
        assert_eq!(result.synthetic_count, 0);
    }

    #[test]
    fn synthetics_lie_on_segments() {
        // 1-D minority at 0 and 10 with k = 1: every synthetic in [0, 10]
        let features = Matrix::from_rows(&[
            vec![0.0],
            vec![10.0],
            vec![5.0],
            vec![5.0],
            vec![5.0],
            vec![5.0],
            vec![5.0],
            vec![5.0],
        ]);
        let labels = vec![1, 1, 0, 0, 0, 0, 0, 0];
        let cfg = SmoteConfig { k_neighbors: 1, seed: 9 };
        let result = smote(&features, &labels, &cfg).unwrap();
        assert_eq!(count(&result.labels), (6, 6));
        for r in 8..result.features.rows() {
            let v = result.features.get(r, 0);
            assert!((0.0..=10.0).contains(&v), "synthetic {v} off segment");
            assert_eq!(result.labels[r], 1);
        }
    }

    /// Brute-force oracle: every synthetic row must be a convex
    /// combination of some minority sample and one of its k nearest
    /// minority neighbors.
    #[test]
    fn synthetics_are_convex_combinations_of_neighbor_pairs() {
        let mut rng = Rng::from_seed(33);
        let n = 40;
        let features = Matrix::gaussian(n, 3, 1.0, &mut rng);
        let labels: Vec<u8> = (0..n).map(|i| (i < 15) as u8).collect();
        let k = 4;
        let cfg = SmoteConfig { k_neighbors: k, seed: 77 };
        let result = smote(&features, &labels, &cfg).unwrap();

        let minority: Vec<usize> = (0..n).filter(|&r| labels[r] == 1).collect();
        let nearest = |i: usize| -> Vec<usize> {
            let mut d: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let dist: f64 = features
                        .row(i)
                        .iter()
                        .zip(features.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        };

        for s in n..result.features.rows() {
            let row = result.features.row(s);
            let mut explained = false;
            'outer: for &a in &minority {
                for b in nearest(a) {
                    // solve r = xa + u (xb - xa) on the first coordinate
                    // with a non-degenerate direction, then check the rest
                    let xa = features.row(a);
                    let xb = features.row(b);
                    let (mut u, mut found) = (0.0, false);
                    for c in 0..3 {
                        if (xb[c] - xa[c]).abs() > 1e-12 {
                            u = (row[c] - xa[c]) / (xb[c] - xa[c]);
                            found = true;
                            break;
                        }
                    }
                    if !found {
                        continue;
                    }
                    if !(-1e-9..=1.0 + 1e-9).contains(&u) {
                        continue;
                    }
                    let ok = (0..3).all(|c| {
                        (row[c] - (xa[c] + u * (xb[c] - xa[c]))).abs() < 1e-9
                    });
                    if ok {
                        explained = true;
                        break 'outer;
                    }
                }
            }
            assert!(explained, "synthetic row {s} not on any neighbor segment");
        }
    }

    #[test]
    fn minority_of_one_errors() {
        let features = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let labels = vec![1, 0, 0];
        assert!(smote(&features, &labels, &SmoteConfig::default()).is_err());
    }

    #[test]
    fn oversized_k_clamped_with_warning() {
        let features = Matrix::from_rows(&[
            vec![0.0],
            vec![1.0],
            vec![2.0],
            vec![3.0],
            vec![4.0],
        ]);
        let labels = vec![1, 1, 0, 0, 0];
        let result = smote(&features, &labels, &SmoteConfig { k_neighbors: 5, seed: 1 }).unwrap();
        assert_eq!(result.warnings.len(), 1);
        assert!(result.warnings[0].contains("clamped"));
        assert_eq!(count(&result.labels), (3, 3));
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = Rng::from_seed(2);
        let features = Matrix::gaussian(30, 2, 1.0, &mut rng);
        let labels: Vec<u8> = (0..30).map(|i| (i < 10) as u8).collect();
        let cfg = SmoteConfig { k_neighbors: 3, seed: 4 };
        let a = smote(&features, &labels, &cfg).unwrap();
        let b = smote(&features, &labels, &cfg).unwrap();
        assert_eq!(a.features.data(), b.features.data());
    }
}
