use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    cross_entropy, cross_entropy_backward, derive_seed, relu, relu_backward, softmax_rows,
    AdamState, Matrix, Param, Rng,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: 64, epochs: 300, batch_size: 32, learning_rate: 0.001, seed: 0 }
    }
}

/// One-hidden-layer relu network with a softmax output, trained with
/// Adam on cross-entropy via the shared numeric kernels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    w1: Param,
    b1: Param,
    w2: Param,
    b2: Param,
}

impl MlpModel {
    fn logits(&self, x: &Matrix) -> Matrix {
        let mut h = x.matmul(&self.w1.value);
        add_bias(&mut h, self.b1.value.row(0));
        let h = relu(&h);
        let mut out = h.matmul(&self.w2.value);
        add_bias(&mut out, self.b2.value.row(0));
        out
    }

    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        softmax_rows(&self.logits(x))
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> [f64; 2] {
        let p = self.predict_proba(&Matrix::from_vec(1, row.len(), row.to_vec()));
        [p.get(0, 0), p.get(0, 1)]
    }
}

fn add_bias(m: &mut Matrix, bias: &[f64]) {
    for r in 0..m.rows() {
        for (v, &b) in m.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

pub fn fit_mlp(x: &Matrix, y: &[u8], params: &MlpParams) -> Result<MlpModel> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Data("mlp: empty or mismatched training data".into()));
    }
    if params.hidden == 0 || params.epochs == 0 || params.batch_size == 0 {
        return Err(Error::Config("mlp: hidden, epochs, batch_size must be positive".into()));
    }
    let d = x.cols();
    let mut init_rng = Rng::from_seed(derive_seed(params.seed, 1));
    // small positive hidden bias keeps relu units alive at the start
    let mut b1 = Matrix::zeros(1, params.hidden);
    b1.fill(0.01);
    let mut model = MlpModel {
        params: params.clone(),
        w1: Param::new(Matrix::glorot(d, params.hidden, &mut init_rng)),
        b1: Param::new(b1),
        w2: Param::new(Matrix::glorot(params.hidden, 2, &mut init_rng)),
        b2: Param::new(Matrix::zeros(1, 2)),
    };

    let mut adam = {
        let refs = [&model.w1, &model.b1, &model.w2, &model.b2];
        AdamState::new(&refs, params.learning_rate, 0.0)
    };
    let mut rng = Rng::from_seed(derive_seed(params.seed, 2));
    let mut order: Vec<usize> = (0..x.rows()).collect();
    for epoch in 0..params.epochs {
        rng.shuffle(&mut order);
        for (batch_idx, batch) in order.chunks(params.batch_size).enumerate() {
            let xb = x.select_rows(batch);
            let labels: Vec<usize> = batch.iter().map(|&r| y[r] as usize).collect();

            // forward with cached activations
            let mut pre1 = xb.matmul(&model.w1.value);
            add_bias(&mut pre1, model.b1.value.row(0));
            let act1 = relu(&pre1);
            let mut logits = act1.matmul(&model.w2.value);
            add_bias(&mut logits, model.b2.value.row(0));

            let (loss, probs) = cross_entropy(&logits, &labels, None)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "mlp: non-finite loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            let dlogits = cross_entropy_backward(&probs, &labels, None);

            model.w2.grad.add_assign(&act1.matmul_ta(&dlogits));
            accumulate_bias(&mut model.b2, &dlogits);
            let dact1 = dlogits.matmul_tb(&model.w2.value);
            let dpre1 = relu_backward(&pre1, &dact1);
            model.w1.grad.add_assign(&xb.matmul_ta(&dpre1));
            accumulate_bias(&mut model.b1, &dpre1);

            let mut refs = [&mut model.w1, &mut model.b1, &mut model.w2, &mut model.b2];
            adam.step(&mut refs);
        }
    }
    Ok(model)
}

fn accumulate_bias(bias: &mut Param, dy: &Matrix) {
    let g = bias.grad.row_mut(0);
    for r in 0..dy.rows() {
        for (gi, &d) in g.iter_mut().zip(dy.row(r)) {
            *gi += d;
        }
    }
}
