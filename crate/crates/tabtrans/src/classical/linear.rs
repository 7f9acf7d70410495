use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    LogisticRegression,
    Lda,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    /// Discriminant direction (logreg weights or LDA projection).
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

pub const LOGREG_L2: f64 = 1e-4;
pub const LOGREG_TOL: f64 = 1e-6;
pub const LOGREG_MAX_ITERS: usize = 10_000;
pub const LDA_RIDGE: f64 = 1e-6;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn fit_linear(x: &Matrix, y: &[u8], kind: LinearKind) -> Result<LinearModel> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Data("linear: empty or mismatched training data".into()));
    }
    match kind {
        LinearKind::LogisticRegression => fit_logreg(x, y),
        LinearKind::Lda => fit_lda(x, y),
    }
}

/// Gradient descent with backtracking line search on the L2-regularized
/// mean cross-entropy (intercept unregularized), run to gradient-norm
/// tolerance 1e-6 or 10000 iterations.
fn fit_logreg(x: &Matrix, y: &[u8]) -> Result<LinearModel> {
    let n = x.rows();
    let d = x.cols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;

    let objective = |w: &[f64], b: f64| -> f64 {
        let mut loss = 0.0;
        for r in 0..n {
            let z: f64 = x.row(r).iter().zip(w).map(|(xi, wi)| xi * wi).sum::<f64>() + b;
            let p = sigmoid(z).clamp(1e-15, 1.0 - 1e-15);
            loss -= if y[r] == 1 { p.ln() } else { (1.0 - p).ln() };
        }
        loss / n as f64 + 0.5 * LOGREG_L2 * w.iter().map(|v| v * v).sum::<f64>()
    };

    let mut step = 1.0;
    let mut iterations = 0;
    for _ in 0..LOGREG_MAX_ITERS {
        iterations += 1;
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for r in 0..n {
            let z: f64 = x.row(r).iter().zip(&w).map(|(xi, wi)| xi * wi).sum::<f64>() + b;
            let err = sigmoid(z) - y[r] as f64;
            for (g, xi) in gw.iter_mut().zip(x.row(r)) {
                *g += err * xi;
            }
            gb += err;
        }
        for (g, wi) in gw.iter_mut().zip(&w) {
            *g = *g / n as f64 + LOGREG_L2 * wi;
        }
        gb /= n as f64;

        let grad_norm =
            (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if grad_norm < LOGREG_TOL {
            break;
        }

        // backtracking from the last accepted step
        let current = objective(&w, b);
        step *= 2.0;
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
            let cand_b = b - step * gb;
            if objective(&cand_w, cand_b) <= current - 0.5 * step * grad_norm * grad_norm {
                w = cand_w;
                b = cand_b;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                w = cand_w;
                b = cand_b;
                break;
            }
        }
    }
    Ok(LinearModel { kind: LinearKind::LogisticRegression, weights: w, bias: b, iterations })
}

/// Two-class LDA via the pooled-covariance closed form with a ridge on
/// the covariance diagonal; probabilities through the logistic link of
/// the discriminant.
fn fit_lda(x: &Matrix, y: &[u8]) -> Result<LinearModel> {
    let n = x.rows();
    let d = x.cols();
    let pos: Vec<usize> = (0..n).filter(|&r| y[r] == 1).collect();
    let neg: Vec<usize> = (0..n).filter(|&r| y[r] == 0).collect();
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::Data("lda: each class needs at least 2 rows".into()));
    }
    let mean_of = |rows: &[usize]| -> Vec<f64> {
        let mut m = vec![0.0; d];
        for &r in rows {
            for (mi, xi) in m.iter_mut().zip(x.row(r)) {
                *mi += xi;
            }
        }
        m.iter_mut().for_each(|v| *v /= rows.len() as f64);
        m
    };
    let mu1 = mean_of(&pos);
    let mu0 = mean_of(&neg);

    // pooled covariance with ridge
    let mut cov = Matrix::zeros(d, d);
    for (rows, mu) in [(&pos, &mu1), (&neg, &mu0)] {
        for &r in rows.iter() {
            let xr = x.row(r);
            for i in 0..d {
                let di = xr[i] - mu[i];
                for j in 0..d {
                    let v = cov.get(i, j) + di * (xr[j] - mu[j]);
                    cov.set(i, j, v);
                }
            }
        }
    }
    let denom = (n - 2) as f64;
    for i in 0..d {
        for j in 0..d {
            let v = cov.get(i, j) / denom + if i == j { LDA_RIDGE } else { 0.0 };
            cov.set(i, j, v);
        }
    }

    let diff: Vec<f64> = mu1.iter().zip(&mu0).map(|(a, b)| a - b).collect();
    let w = cholesky_solve(&cov, &diff)?;

    let prior1 = pos.len() as f64 / n as f64;
    let mid: Vec<f64> = mu1.iter().zip(&mu0).map(|(a, b)| 0.5 * (a + b)).collect();
    let bias = (prior1 / (1.0 - prior1)).ln()
        - w.iter().zip(&mid).map(|(wi, mi)| wi * mi).sum::<f64>();
    Ok(LinearModel { kind: LinearKind::Lda, weights: w, bias, iterations: 0 })
}

/// Solves A x = b for symmetric positive-definite A.
fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let d = a.rows();
    let mut l = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numeric(
                        "lda: covariance singular beyond ridge rescue".into(),
                    ));
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    // forward then back substitution
    let mut yv = vec![0.0; d];
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * yv[k];
        }
        yv[i] = sum / l.get(i, i);
    }
    let mut xv = vec![0.0; d];
    for i in (0..d).rev() {
        let mut sum = yv[i];
        for k in i + 1..d {
            sum -= l.get(k, i) * xv[k];
        }
        xv[i] = sum / l.get(i, i);
    }
    Ok(xv)
}

impl LinearModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>() + self.bias
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> [f64; 2] {
        let p = sigmoid(self.decision(row));
        [1.0 - p, p]
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
