use serde::{Deserialize, Serialize};

use super::dense::Dense;
use crate::numerics::{
    dropout_mask, layer_norm, layer_norm_backward, relu, relu_backward, softmax_rows,
    softmax_rows_backward, LayerNormCache, Matrix, Param, Rng,
};

/// One post-norm encoder block: multi-head self-attention with residual
/// connection and layer norm, then a position-wise feed-forward sublayer
/// with its own residual and layer norm. Dropout (train mode only) is
/// applied to each sublayer's output before the residual addition.
///
/// Forward and backward run over a packed batch: `input` stacks every
/// sample's m token rows, so the projections and feed-forward are a few
/// large matrix products while attention mixes only within each
/// m-row sample block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderBlock {
    wq: Vec<Param>,
    wk: Vec<Param>,
    wv: Vec<Param>,
    wo: Param,
    ff1: Dense,
    ff2: Dense,
    ln1_gain: Param,
    ln1_bias: Param,
    ln2_gain: Param,
    ln2_bias: Param,
    pub dropout: f64,
    heads: usize,
    head_dim: usize,
}

/// Feed-forward hidden width as a multiple of the embedding width.
const FF_MULT: usize = 4;

pub(super) struct BlockCache {
    input: Matrix,
    q: Vec<Matrix>,
    k: Vec<Matrix>,
    v: Vec<Matrix>,
    /// Per head: packed attention probabilities, row b*m+i holding token
    /// i's weights over its own sample's m tokens.
    attn: Vec<Matrix>,
    concat: Matrix,
    drop1: Option<Matrix>,
    ln1: LayerNormCache,
    ln1_out: Matrix,
    ff_pre: Matrix,
    ff_act: Matrix,
    drop2: Option<Matrix>,
    ln2: LayerNormCache,
}

impl EncoderBlock {
    pub fn new(d: usize, heads: usize, dropout: f64, rng: &mut Rng) -> Self {
        assert_eq!(d % heads, 0, "validated by TrainConfig");
        let head_dim = d / heads;
        let mk = |rng: &mut Rng| Param::new(Matrix::glorot(d, head_dim, rng));
        EncoderBlock {
            wq: (0..heads).map(|_| mk(rng)).collect(),
            wk: (0..heads).map(|_| mk(rng)).collect(),
            wv: (0..heads).map(|_| mk(rng)).collect(),
            wo: Param::new(Matrix::glorot(d, d, rng)),
            ff1: Dense::new(d, FF_MULT * d, rng),
            ff2: Dense::new(FF_MULT * d, d, rng),
            ln1_gain: Param::new(Matrix::from_vec(1, d, vec![1.0; d])),
            ln1_bias: Param::new(Matrix::zeros(1, d)),
            ln2_gain: Param::new(Matrix::from_vec(1, d, vec![1.0; d])),
            ln2_bias: Param::new(Matrix::zeros(1, d)),
            dropout,
            heads,
            head_dim,
        }
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    /// Attention probability matrices of each head for one sample, for
    /// inspection and invariants (rows sum to 1).
    pub fn attention_matrices(&self, h: &Matrix) -> Vec<Matrix> {
        let scale = 1.0 / (self.head_dim as f64).sqrt();
        (0..self.heads)
            .map(|i| {
                let q = h.matmul(&self.wq[i].value);
                let k = h.matmul(&self.wk[i].value);
                let mut scores = q.matmul_tb(&k);
                scores.scale(scale);
                softmax_rows(&scores)
            })
            .collect()
    }

    /// Evaluation-mode forward of a single sample (m tokens).
    pub fn forward_eval(&self, h: &Matrix) -> Matrix {
        let (out, _) = self.forward_packed(h, h.rows(), None);
        out
    }

    /// Forward over a packed batch of samples, each `m` consecutive
    /// rows. Keeps the activations backward needs; dropout fires only
    /// when a training RNG is supplied.
    pub(super) fn forward_packed(
        &self,
        input: &Matrix,
        m: usize,
        mut rng: Option<&mut Rng>,
    ) -> (Matrix, BlockCache) {
        let total = input.rows();
        debug_assert_eq!(total % m, 0, "packed batch must stack m-row samples");
        let d = input.cols();
        let scale = 1.0 / (self.head_dim as f64).sqrt();
        let hd = self.head_dim;

        let mut q = Vec::with_capacity(self.heads);
        let mut k = Vec::with_capacity(self.heads);
        let mut v = Vec::with_capacity(self.heads);
        let mut attn = Vec::with_capacity(self.heads);
        let mut concat = Matrix::zeros(total, d);
        for i in 0..self.heads {
            let qi = input.matmul(&self.wq[i].value);
            let ki = input.matmul(&self.wk[i].value);
            let vi = input.matmul(&self.wv[i].value);

            // per-sample scaled dot-product scores, packed as total x m
            let mut scores = Matrix::zeros(total, m);
            for base in (0..total).step_by(m) {
                for ti in 0..m {
                    let qrow = qi.row(base + ti);
                    let srow = scores.row_mut(base + ti);
                    for (tj, s) in srow.iter_mut().enumerate() {
                        let krow = ki.row(base + tj);
                        let mut acc = 0.0;
                        for (a, b) in qrow.iter().zip(krow) {
                            acc += a * b;
                        }
                        *s = acc * scale;
                    }
                }
            }
            let ai = softmax_rows(&scores);

            // head output written straight into the concat slice
            for base in (0..total).step_by(m) {
                for ti in 0..m {
                    let arow = ai.row(base + ti);
                    let out = &mut concat.row_mut(base + ti)[i * hd..(i + 1) * hd];
                    for (tj, &w) in arow.iter().enumerate() {
                        let vrow = vi.row(base + tj);
                        for (o, &vv) in out.iter_mut().zip(vrow) {
                            *o += w * vv;
                        }
                    }
                }
            }
            q.push(qi);
            k.push(ki);
            v.push(vi);
            attn.push(ai);
        }
        let mut attn_proj = concat.matmul(&self.wo.value);

        let drop1 = rng.as_deref_mut().and_then(|rng| {
            (self.dropout > 0.0).then(|| dropout_mask(total, d, self.dropout, rng))
        });
        if let Some(mask) = &drop1 {
            for (x, &dm) in attn_proj.data_mut().iter_mut().zip(mask.data()) {
                *x *= dm;
            }
        }
        attn_proj.add_assign(input); // residual
        let (ln1_out, ln1) =
            layer_norm(&attn_proj, self.ln1_gain.value.row(0), self.ln1_bias.value.row(0));

        let ff_pre = self.ff1.forward(&ln1_out);
        let ff_act = relu(&ff_pre);
        let mut ff_out = self.ff2.forward(&ff_act);

        let drop2 = rng.and_then(|rng| {
            (self.dropout > 0.0).then(|| dropout_mask(total, d, self.dropout, rng))
        });
        if let Some(mask) = &drop2 {
            for (x, &dm) in ff_out.data_mut().iter_mut().zip(mask.data()) {
                *x *= dm;
            }
        }
        ff_out.add_assign(&ln1_out); // residual
        let (out, ln2) =
            layer_norm(&ff_out, self.ln2_gain.value.row(0), self.ln2_bias.value.row(0));

        let cache = BlockCache {
            input: input.clone(),
            q,
            k,
            v,
            attn,
            concat,
            drop1,
            ln1,
            ln1_out,
            ff_pre,
            ff_act,
            drop2,
            ln2,
        };
        (out, cache)
    }

    /// Backward over a packed batch; accumulates parameter gradients and
    /// returns dL/dinput.
    pub(super) fn backward_packed(
        &mut self,
        cache: &BlockCache,
        m: usize,
        dout: &Matrix,
    ) -> Matrix {
        let total = cache.input.rows();
        let scale = 1.0 / (self.head_dim as f64).sqrt();
        let hd = self.head_dim;

        // second layer norm
        let d_res2 = {
            let gain = self.ln2_gain.value.row(0).to_vec();
            layer_norm_backward(
                dout,
                &cache.ln2,
                &gain,
                self.ln2_gain.grad.row_mut(0),
                self.ln2_bias.grad.row_mut(0),
            )
        };

        // residual: res2 = ln1_out + drop(ff_out)
        let mut d_ff_out = d_res2.clone();
        if let Some(mask) = &cache.drop2 {
            for (x, &dm) in d_ff_out.data_mut().iter_mut().zip(mask.data()) {
                *x *= dm;
            }
        }
        let d_ff_act = self.ff2.backward(&cache.ff_act, &d_ff_out);
        let d_ff_pre = relu_backward(&cache.ff_pre, &d_ff_act);
        let mut d_ln1_out = self.ff1.backward(&cache.ln1_out, &d_ff_pre);
        d_ln1_out.add_assign(&d_res2); // residual path

        // first layer norm
        let d_res1 = {
            let gain = self.ln1_gain.value.row(0).to_vec();
            layer_norm_backward(
                &d_ln1_out,
                &cache.ln1,
                &gain,
                self.ln1_gain.grad.row_mut(0),
                self.ln1_bias.grad.row_mut(0),
            )
        };

        // residual: res1 = input + drop(concat * wo)
        let mut d_attn_proj = d_res1.clone();
        if let Some(mask) = &cache.drop1 {
            for (x, &dm) in d_attn_proj.data_mut().iter_mut().zip(mask.data()) {
                *x *= dm;
            }
        }
        self.wo.grad.add_assign(&cache.concat.matmul_ta(&d_attn_proj));
        let d_concat = d_attn_proj.matmul_tb(&self.wo.value);

        let mut d_input = d_res1; // residual path
        for i in 0..self.heads {
            // dA and dV from the head's slice of d_concat
            let mut d_attn = Matrix::zeros(total, m);
            let mut d_v = Matrix::zeros(total, hd);
            for base in (0..total).step_by(m) {
                for ti in 0..m {
                    let d_head = &d_concat.row(base + ti)[i * hd..(i + 1) * hd];
                    let darow = d_attn.row_mut(base + ti);
                    let arow = cache.attn[i].row(base + ti);
                    for tj in 0..m {
                        let vrow = cache.v[i].row(base + tj);
                        let mut acc = 0.0;
                        for (a, b) in d_head.iter().zip(vrow) {
                            acc += a * b;
                        }
                        darow[tj] = acc;
                        let w = arow[tj];
                        let dvrow = d_v.row_mut(base + tj);
                        for (dv, &dh) in dvrow.iter_mut().zip(d_head) {
                            *dv += w * dh;
                        }
                    }
                }
            }
            let mut d_scores = softmax_rows_backward(&cache.attn[i], &d_attn);
            d_scores.scale(scale);

            // dQ = dS K, dK = dS^T Q, per sample block
            let mut d_q = Matrix::zeros(total, hd);
            let mut d_k = Matrix::zeros(total, hd);
            for base in (0..total).step_by(m) {
                for ti in 0..m {
                    let dsrow = d_scores.row(base + ti);
                    let qrow = cache.q[i].row(base + ti).to_vec();
                    let dqrow = d_q.row_mut(base + ti);
                    for tj in 0..m {
                        let ds = dsrow[tj];
                        if ds == 0.0 {
                            continue;
                        }
                        let krow = cache.k[i].row(base + tj);
                        for (dq, &kv) in dqrow.iter_mut().zip(krow) {
                            *dq += ds * kv;
                        }
                    }
                    for tj in 0..m {
                        let ds = dsrow[tj];
                        if ds == 0.0 {
                            continue;
                        }
                        let dkrow = d_k.row_mut(base + tj);
                        for (dk, &qv) in dkrow.iter_mut().zip(&qrow) {
                            *dk += ds * qv;
                        }
                    }
                }
            }

            self.wq[i].grad.add_assign(&cache.input.matmul_ta(&d_q));
            self.wk[i].grad.add_assign(&cache.input.matmul_ta(&d_k));
            self.wv[i].grad.add_assign(&cache.input.matmul_ta(&d_v));

            d_input.add_assign(&d_q.matmul_tb(&self.wq[i].value));
            d_input.add_assign(&d_k.matmul_tb(&self.wk[i].value));
            d_input.add_assign(&d_v.matmul_tb(&self.wv[i].value));
        }
        d_input
    }

    pub(super) fn collect_params<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        for p in self.wq.iter_mut().chain(self.wk.iter_mut()).chain(self.wv.iter_mut()) {
            out.push(p);
        }
        out.push(&mut self.wo);
        out.push(&mut self.ff1.w);
        out.push(&mut self.ff1.b);
        out.push(&mut self.ff2.w);
        out.push(&mut self.ff2.b);
        out.push(&mut self.ln1_gain);
        out.push(&mut self.ln1_bias);
        out.push(&mut self.ln2_gain);
        out.push(&mut self.ln2_bias);
    }

    pub(super) fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        for i in 0..self.heads {
            out.push(format!("{prefix}.wq[{i}]"));
        }
        for i in 0..self.heads {
            out.push(format!("{prefix}.wk[{i}]"));
        }
        for i in 0..self.heads {
            out.push(format!("{prefix}.wv[{i}]"));
        }
        out.push(format!("{prefix}.wo"));
        out.push(format!("{prefix}.ff1.w"));
        out.push(format!("{prefix}.ff1.b"));
        out.push(format!("{prefix}.ff2.w"));
        out.push(format!("{prefix}.ff2.b"));
        out.push(format!("{prefix}.ln1.gain"));
        out.push(format!("{prefix}.ln1.bias"));
        out.push(format!("{prefix}.ln2.gain"));
        out.push(format!("{prefix}.ln2.bias"));
    }
}
