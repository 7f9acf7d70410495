use super::{Matrix, Rng};
use crate::error::{Error, Result};

/// Row-wise softmax with max-subtraction so large logits cannot overflow.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Exact Jacobian-vector product of row-wise softmax: given the forward
/// output `y` and upstream gradient `dy`, returns dL/dx where
/// dx_j = y_j * (dy_j - sum_k dy_k y_k), per row.
pub fn softmax_rows_backward(y: &Matrix, dy: &Matrix) -> Matrix {
    assert_eq!((y.rows(), y.cols()), (dy.rows(), dy.cols()));
    let mut out = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let yr = y.row(r);
        let dr = dy.row(r);
        let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
        let orow = out.row_mut(r);
        for ((o, &yv), &dv) in orow.iter_mut().zip(yr).zip(dr) {
            *o = yv * (dv - dot);
        }
    }
    out
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Values cached by the layer-norm forward pass that its backward needs.
pub struct LayerNormCache {
    /// Standardized input, (x - mean) / sqrt(var + eps), per row.
    pub normalized: Matrix,
    /// Per-row 1 / sqrt(var + eps).
    pub inv_std: Vec<f64>,
}

/// Per-row standardization (population variance, eps = 1e-5) followed by
/// an affine `gain * xhat + bias`. `gain` and `bias` have length = cols.
pub fn layer_norm(m: &Matrix, gain: &[f64], bias: &[f64]) -> (Matrix, LayerNormCache) {
    assert_eq!(gain.len(), m.cols());
    assert_eq!(bias.len(), m.cols());
    let mut out = Matrix::zeros(m.rows(), m.cols());
    let mut normalized = Matrix::zeros(m.rows(), m.cols());
    let mut inv_std = Vec::with_capacity(m.rows());
    let n = m.cols() as f64;
    for r in 0..m.rows() {
        let row = m.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(is);
        for c in 0..m.cols() {
            let xhat = (row[c] - mean) * is;
            normalized.set(r, c, xhat);
            out.set(r, c, gain[c] * xhat + bias[c]);
        }
    }
    (out, LayerNormCache { normalized, inv_std })
}

/// Backward of [`layer_norm`]. Returns dL/dx and accumulates dL/dgain and
/// dL/dbias into the provided slices.
pub fn layer_norm_backward(
    dy: &Matrix,
    cache: &LayerNormCache,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Matrix {
    let rows = dy.rows();
    let cols = dy.cols();
    let n = cols as f64;
    let mut dx = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let dyr = dy.row(r);
        let xhat = cache.normalized.row(r);
        let is = cache.inv_std[r];
        // w = dy * gain; dx = (w - mean(w) - xhat * mean(w .* xhat)) * inv_std
        let mut mean_w = 0.0;
        let mut mean_wx = 0.0;
        for c in 0..cols {
            let w = dyr[c] * gain[c];
            mean_w += w;
            mean_wx += w * xhat[c];
            dgain[c] += dyr[c] * xhat[c];
            dbias[c] += dyr[c];
        }
        mean_w /= n;
        mean_wx /= n;
        let dxr = dx.row_mut(r);
        for c in 0..cols {
            let w = dyr[c] * gain[c];
            dxr[c] = (w - mean_w - xhat[c] * mean_wx) * is;
        }
    }
    dx
}

pub fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    out.data_mut().iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0;
        }
    });
    out
}

/// dL/dx for relu given the pre-activation input.
pub fn relu_backward(input: &Matrix, dy: &Matrix) -> Matrix {
    let mut out = dy.clone();
    for (o, &x) in out.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *o = 0.0;
        }
    }
    out
}

/// Inverted-dropout mask: entries are 1/(1-rate) with probability 1-rate,
/// else 0, so expected activation scale is unchanged.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Matrix {
    debug_assert!((0.0..1.0).contains(&rate));
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = if rng.uniform() < keep { scale } else { 0.0 };
    }
    m
}

/// Mean negative log-softmax of the true class over the batch, optionally
/// weight-averaged. Returns (loss, probabilities) with probabilities kept
/// for the backward pass.
pub fn cross_entropy(
    logits: &Matrix,
    labels: &[usize],
    sample_weights: Option<&[f64]>,
) -> Result<(f64, Matrix)> {
    assert_eq!(logits.rows(), labels.len());
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut wsum = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= logits.cols() {
            return Err(Error::Numeric(format!(
                "label {label} out of range for {} classes",
                logits.cols()
            )));
        }
        let w = sample_weights.map_or(1.0, |ws| ws[r]);
        let p = probs.get(r, label).max(1e-300);
        loss -= w * p.ln();
        wsum += w;
    }
    if wsum <= 0.0 {
        return Err(Error::Numeric("cross_entropy: zero total weight".into()));
    }
    Ok((loss / wsum, probs))
}

/// dL/dlogits for [`cross_entropy`]: (softmax - onehot) * w / sum(w).
pub fn cross_entropy_backward(
    probs: &Matrix,
    labels: &[usize],
    sample_weights: Option<&[f64]>,
) -> Matrix {
    let mut d = probs.clone();
    let wsum = sample_weights.map_or(labels.len() as f64, |ws| ws.iter().sum());
    for (r, &label) in labels.iter().enumerate() {
        let w = sample_weights.map_or(1.0, |ws| ws[r]);
        let row = d.row_mut(r);
        for v in row.iter_mut() {
            *v *= w / wsum;
        }
        row[label] -= w / wsum;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = Rng::from_seed(seed);
        Matrix::gaussian(rows, cols, 1.0, &mut rng)
    }

    /// Central finite differences of a scalar function of one matrix.
    fn finite_diff(m: &Matrix, f: impl Fn(&Matrix) -> f64) -> Matrix {
        let h = 1e-5;
        let mut g = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.data().len() {
            let mut plus = m.clone();
            plus.data_mut()[i] += h;
            let mut minus = m.clone();
            minus.data_mut()[i] -= h;
            g.data_mut()[i] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        g
    }

    fn assert_grad_close(analytic: &Matrix, numeric: &Matrix) {
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            let denom = a.abs().max(n.abs()).max(1e-6);
            assert!(
                (a - n).abs() / denom < 1e-4,
                "grad mismatch: analytic {a}, numeric {n}"
            );
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = rand_matrix(6, 5, 1);
        let s = softmax_rows(&m);
        for r in 0..s.rows() {
            let sum: f64 = s.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_constant_row_is_uniform() {
        let m = Matrix::from_rows(&[vec![3.0; 4]]);
        let s = softmax_rows(&m);
        for &v in s.row(0) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_shift_invariant() {
        let m = rand_matrix(3, 4, 2);
        let mut shifted = m.clone();
        for r in 0..shifted.rows() {
            for v in shifted.row_mut(r) {
                *v += 17.5;
            }
        }
        assert!(softmax_rows(&m).max_abs_diff(&softmax_rows(&shifted)) < 1e-12);
    }

    #[test]
    fn softmax_backward_matches_finite_diff() {
        let m = rand_matrix(4, 5, 3);
        let dy = rand_matrix(4, 5, 4);
        let y = softmax_rows(&m);
        let analytic = softmax_rows_backward(&y, &dy);
        let numeric = finite_diff(&m, |x| {
            let y = softmax_rows(x);
            y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum()
        });
        assert_grad_close(&analytic, &numeric);
    }

    #[test]
    fn layer_norm_standardizes_rows() {
        let m = rand_matrix(5, 8, 5);
        let gain = vec![1.0; 8];
        let bias = vec![0.0; 8];
        let (y, _) = layer_norm(&m, &gain, &bias);
        for r in 0..y.rows() {
            let row = y.row(r);
            let mean: f64 = row.iter().sum::<f64>() / 8.0;
            let var: f64 = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-4); // eps shifts variance slightly
        }
    }

    #[test]
    fn layer_norm_constant_row_maps_to_bias() {
        let m = Matrix::from_rows(&[vec![7.0; 4]]);
        let (y, _) = layer_norm(&m, &[2.0; 4], &[0.5; 4]);
        for &v in y.row(0) {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_backward_matches_finite_diff() {
        let m = rand_matrix(4, 6, 6);
        let mut rng = Rng::from_seed(7);
        let gain: Vec<f64> = (0..6).map(|_| 1.0 + 0.3 * rng.normal()).collect();
        let bias: Vec<f64> = (0..6).map(|_| 0.2 * rng.normal()).collect();
        let dy = rand_matrix(4, 6, 8);

        let (_, cache) = layer_norm(&m, &gain, &bias);
        let mut dgain = vec![0.0; 6];
        let mut dbias = vec![0.0; 6];
        let dx = layer_norm_backward(&dy, &cache, &gain, &mut dgain, &mut dbias);

        let loss = |x: &Matrix| -> f64 {
            let (y, _) = layer_norm(x, &gain, &bias);
            y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum()
        };
        assert_grad_close(&dx, &finite_diff(&m, loss));

        // gain/bias grads against finite differences too
        let h = 1e-5;
        for c in 0..6 {
            let mut gp = gain.clone();
            gp[c] += h;
            let mut gm = gain.clone();
            gm[c] -= h;
            let f = |g: &[f64]| {
                let (y, _) = layer_norm(&m, g, &bias);
                y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum::<f64>()
            };
            let num = (f(&gp) - f(&gm)) / (2.0 * h);
            assert!((dgain[c] - num).abs() / num.abs().max(1e-6) < 1e-4);
        }
    }

    #[test]
    fn cross_entropy_uniform_logits_is_ln2() {
        let logits = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.3, 1.3]]);
        let (loss, _) = cross_entropy(&logits, &[0, 1], None).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_confident_correct_is_tiny() {
        let logits = Matrix::from_rows(&[vec![20.0, 0.0]]);
        let (loss, _) = cross_entropy(&logits, &[0], None).unwrap();
        assert!(loss < 1e-8);
    }

    #[test]
    fn cross_entropy_backward_matches_finite_diff() {
        let logits = rand_matrix(5, 3, 9);
        let labels = vec![0, 2, 1, 1, 0];
        let weights = vec![1.0, 0.5, 2.0, 1.5, 0.25];
        let (_, probs) = cross_entropy(&logits, &labels, Some(&weights)).unwrap();
        let analytic = cross_entropy_backward(&probs, &labels, Some(&weights));
        let numeric = finite_diff(&logits, |x| {
            cross_entropy(x, &labels, Some(&weights)).unwrap().0
        });
        assert_grad_close(&analytic, &numeric);
    }

    #[test]
    fn dropout_mask_scales_to_unit_mean() {
        let mut rng = Rng::from_seed(10);
        let m = dropout_mask(100, 100, 0.2, &mut rng);
        let mean: f64 = m.data().iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }
}
