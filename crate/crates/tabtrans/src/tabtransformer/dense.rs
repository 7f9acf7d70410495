use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, Param, Rng};

/// Fully-connected layer y = x W + b with Glorot-uniform weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    pub w: Param,
    pub b: Param,
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        Dense {
            w: Param::new(Matrix::glorot(input, output, rng)),
            b: Param::new(Matrix::zeros(1, output)),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul(&self.w.value);
        let bias = self.b.value.row(0);
        for r in 0..y.rows() {
            for (v, &b) in y.row_mut(r).iter_mut().zip(bias) {
                *v += b;
            }
        }
        y
    }

    /// Accumulates dW and db, returns dL/dx.
    pub fn backward(&mut self, x: &Matrix, dy: &Matrix) -> Matrix {
        self.w.grad.add_assign(&x.matmul_ta(dy));
        let db = self.b.grad.row_mut(0);
        for r in 0..dy.rows() {
            for (g, &d) in db.iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }
        dy.matmul_tb(&self.w.value)
    }
}
