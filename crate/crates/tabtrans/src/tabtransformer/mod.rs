//! Transformer-based contextual feature extraction for tabular rows:
//! per-column categorical embeddings pass through self-attention encoder
//! blocks (no positional encodings) and are concatenated with the
//! continuous features; an MLP head predicts the binary target, and the
//! concatenated vector doubles as the extracted feature representation
//! for downstream classical models.

mod dense;
mod encoder;
mod head;
mod train;

pub use encoder::EncoderBlock;
pub use head::MlpHead;
pub use train::{train, TrainReport};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{cross_entropy, derive_seed, softmax_rows, streams, Matrix, Param, Rng};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub blocks: usize,
    pub heads: usize,
    /// Embedding width d.
    pub embed_dim: usize,
    pub mlp_hidden_factors: Vec<f64>,
    pub mlp_blocks: usize,
    /// Shared per-column prefix width (the column-identity part of each
    /// embedding). Defaults to d / 2.
    pub shared_width: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            weight_decay: 0.0001,
            dropout: 0.2,
            batch_size: 265,
            epochs: 500,
            blocks: 3,
            heads: 4,
            embed_dim: 8,
            mlp_hidden_factors: vec![2.0, 1.0],
            mlp_blocks: 2,
            shared_width: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0
            || self.weight_decay < 0.0
            || !(0.0..1.0).contains(&self.dropout)
        {
            return Err(Error::Config("transformer: bad rate hyperparameters".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.blocks == 0 || self.heads == 0 {
            return Err(Error::Config("transformer: counts must be positive".into()));
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "transformer: heads ({}) must divide embed_dim ({})",
                self.heads, self.embed_dim
            )));
        }
        if self.shared_width >= self.embed_dim {
            return Err(Error::Config(format!(
                "transformer: shared_width ({}) must be < embed_dim ({})",
                self.shared_width, self.embed_dim
            )));
        }
        if self.mlp_hidden_factors.len() != self.mlp_blocks {
            return Err(Error::Config(format!(
                "transformer: mlp_blocks ({}) must match hidden factor count ({})",
                self.mlp_blocks,
                self.mlp_hidden_factors.len()
            )));
        }
        if self.mlp_hidden_factors.iter().any(|&f| f <= 0.0) {
            return Err(Error::Config("transformer: hidden factors must be positive".into()));
        }
        Ok(())
    }
}

/// Per-column embedding tables. Each embedding row is the concatenation
/// [shared column segment (width shared_width), per-class segment]; every
/// column has one extra per-class row reserved for missing values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnEmbedder {
    /// One 1 x shared_width parameter per categorical column.
    pub shared: Vec<Param>,
    /// One (class_count + 1) x (d - shared_width) table per column.
    pub per_class: Vec<Param>,
    pub embed_dim: usize,
    pub shared_width: usize,
}

impl ColumnEmbedder {
    fn new(category_slots: &[usize], d: usize, shared_width: usize, rng: &mut Rng) -> Self {
        let shared = category_slots
            .iter()
            .map(|_| Param::new(Matrix::gaussian(1, shared_width, 0.05, rng)))
            .collect();
        let per_class = category_slots
            .iter()
            .map(|&slots| Param::new(Matrix::gaussian(slots, d - shared_width, 0.05, rng)))
            .collect();
        ColumnEmbedder { shared, per_class, embed_dim: d, shared_width }
    }

    pub fn n_columns(&self) -> usize {
        self.shared.len()
    }

    /// Embeds one row of codes into an m x d matrix; row i is the lookup
    /// of code i in table i (the last table row is the missing slot).
    pub fn embed(&self, codes: &[u32]) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.n_columns(), self.embed_dim);
        self.embed_into(codes, &mut out, 0)?;
        Ok(out)
    }

    /// Writes the embedding block into `out` starting at `base_row`.
    pub fn embed_into(&self, codes: &[u32], out: &mut Matrix, base_row: usize) -> Result<()> {
        if codes.len() != self.n_columns() {
            return Err(Error::Data(format!(
                "embed: expected {} codes, got {}",
                self.n_columns(),
                codes.len()
            )));
        }
        for (i, &code) in codes.iter().enumerate() {
            let table = &self.per_class[i].value;
            if code as usize >= table.rows() {
                return Err(Error::Data(format!(
                    "embed: code {code} out of range for column {i} ({} slots)",
                    table.rows()
                )));
            }
            let row = out.row_mut(base_row + i);
            row[..self.shared_width].copy_from_slice(self.shared[i].value.row(0));
            row[self.shared_width..].copy_from_slice(table.row(code as usize));
        }
        Ok(())
    }

    /// Routes the dL/dH block starting at `base_row` back into the
    /// shared and per-class tables.
    pub fn backward(&mut self, codes: &[u32], dh: &Matrix, base_row: usize) {
        for (i, &code) in codes.iter().enumerate() {
            let drow = dh.row(base_row + i);
            for (g, &d) in self.shared[i].grad.row_mut(0).iter_mut().zip(&drow[..self.shared_width]) {
                *g += d;
            }
            let grad_row = self.per_class[i].grad.row_mut(code as usize);
            for (g, &d) in grad_row.iter_mut().zip(&drow[self.shared_width..]) {
                *g += d;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabTransformerModel {
    pub embedder: ColumnEmbedder,
    pub blocks: Vec<EncoderBlock>,
    pub head: MlpHead,
    pub config: TrainConfig,
    /// Number of continuous features appended to the contextual block.
    pub n_continuous: usize,
    /// Per-column slot counts (classes + missing).
    pub category_slots: Vec<usize>,
    /// Fingerprint of the schema the model was built against.
    pub schema_fingerprint: String,
}

impl TabTransformerModel {
    pub fn new(
        config: TrainConfig,
        category_slots: Vec<usize>,
        n_continuous: usize,
        schema_fingerprint: String,
    ) -> Result<Self> {
        config.validate()?;
        if category_slots.is_empty() {
            return Err(Error::Config(
                "transformer: at least one categorical column is required".into(),
            ));
        }
        let d = config.embed_dim;
        let m = category_slots.len();
        let mut rng = Rng::from_seed(derive_seed(config.seed, streams::TRANSFORMER_INIT));
        let embedder = ColumnEmbedder::new(&category_slots, d, config.shared_width, &mut rng);
        let blocks = (0..config.blocks)
            .map(|_| EncoderBlock::new(d, config.heads, config.dropout, &mut rng))
            .collect();
        let feature_width = d * m + n_continuous;
        let hidden: Vec<usize> = config
            .mlp_hidden_factors
            .iter()
            .map(|&f| ((feature_width as f64) * f).round() as usize)
            .collect();
        let head = MlpHead::new(feature_width, &hidden, 2, config.dropout, &mut rng);
        Ok(TabTransformerModel {
            embedder,
            blocks,
            head,
            config,
            n_continuous,
            category_slots,
            schema_fingerprint,
        })
    }

    pub fn for_dataset(config: TrainConfig, ds: &Dataset) -> Result<Self> {
        let slots: Vec<usize> = (0..ds.n_categorical()).map(|c| ds.category_slots(c)).collect();
        Self::new(config, slots, ds.n_numeric(), ds.schema.fingerprint())
    }

    /// Width of the extracted feature vector, d*m + c.
    pub fn feature_width(&self) -> usize {
        self.config.embed_dim * self.category_slots.len() + self.n_continuous
    }

    /// Deterministic names for the extracted coordinates: contextual
    /// embedding dimensions first, then the continuous features.
    pub fn feature_names(&self) -> Vec<String> {
        let m = self.category_slots.len();
        let d = self.config.embed_dim;
        let mut names: Vec<String> = (0..m * d)
            .map(|i| format!("ctx_{}_{}", i / d, i % d))
            .collect();
        names.extend((0..self.n_continuous).map(|i| format!("cont_{i}")));
        names
    }

    /// Evaluation-mode encoder pass (no dropout).
    pub fn encode_row(&self, codes: &[u32]) -> Result<Matrix> {
        let mut h = self.embedder.embed(codes)?;
        for block in &self.blocks {
            h = block.forward_eval(&h);
        }
        Ok(h)
    }

    /// Per-row layer normalization of the (already scaled) continuous
    /// features, the fixed non-learned normalization the feature block
    /// applies before concatenation.
    pub fn normalize_continuous(&self, cont: &[f64]) -> Vec<f64> {
        crate::numerics::layer_norm(
            &Matrix::from_vec(1, cont.len(), cont.to_vec()),
            &vec![1.0; cont.len()],
            &vec![0.0; cont.len()],
        )
        .0
        .row(0)
        .to_vec()
    }

    /// Extracted feature vector of width d*m + c: flattened contextual
    /// embeddings followed by the normalized continuous features.
    pub fn extract_row(&self, codes: &[u32], cont: &[f64]) -> Result<Vec<f64>> {
        if cont.len() != self.n_continuous {
            return Err(Error::Data(format!(
                "extract: expected {} continuous features, got {}",
                self.n_continuous,
                cont.len()
            )));
        }
        let ctx = self.encode_row(codes)?;
        let mut out = Vec::with_capacity(self.feature_width());
        out.extend_from_slice(ctx.data());
        out.extend(self.normalize_continuous(cont));
        debug_assert_eq!(out.len(), self.feature_width());
        Ok(out)
    }

    /// Extracts features for every row of a (scaled) dataset in one
    /// packed encoder pass.
    pub fn extract_features(&self, ds: &Dataset) -> Result<Matrix> {
        self.check_dataset(ds)?;
        let n = ds.n_rows();
        let m = self.category_slots.len();
        let d = self.config.embed_dim;
        let mut h = Matrix::zeros(n * m, d);
        for r in 0..n {
            self.embedder.embed_into(ds.codes_row(r), &mut h, r * m)?;
        }
        for block in &self.blocks {
            let (next, _) = block.forward_packed(&h, m, None);
            h = next;
        }
        let ctx_width = m * d;
        let mut out = Matrix::zeros(n, self.feature_width());
        for r in 0..n {
            out.row_mut(r)[..ctx_width]
                .copy_from_slice(&h.data()[r * ctx_width..(r + 1) * ctx_width]);
            let cont = self.normalize_continuous(ds.numeric.row(r));
            out.row_mut(r)[ctx_width..].copy_from_slice(&cont);
        }
        Ok(out)
    }

    /// Evaluation-mode logit pair for one row.
    pub fn forward_logits(&self, codes: &[u32], cont: &[f64]) -> Result<[f64; 2]> {
        let features = self.extract_row(codes, cont)?;
        let logits = self
            .head
            .forward_eval(&Matrix::from_vec(1, features.len(), features));
        Ok([logits.get(0, 0), logits.get(0, 1)])
    }

    /// Evaluation-mode class probabilities for every row.
    pub fn predict_proba(&self, ds: &Dataset) -> Result<Matrix> {
        let features = self.extract_features(ds)?;
        Ok(softmax_rows(&self.head.forward_eval(&features)))
    }

    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        let slots: Vec<usize> = (0..ds.n_categorical()).map(|c| ds.category_slots(c)).collect();
        if slots != self.category_slots || ds.n_numeric() != self.n_continuous {
            return Err(Error::Data(
                "dataset layout does not match the model's training layout".into(),
            ));
        }
        Ok(())
    }

    /// Every trainable parameter, a stable enumeration shared by the
    /// optimizer and the gradient checks.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut params: Vec<&mut Param> = Vec::new();
        for p in self.embedder.shared.iter_mut() {
            params.push(p);
        }
        for p in self.embedder.per_class.iter_mut() {
            params.push(p);
        }
        for block in self.blocks.iter_mut() {
            block.collect_params(&mut params);
        }
        self.head.collect_params(&mut params);
        params
    }

    /// Names parallel to [`Self::params_mut`], for diagnostics.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.embedder.shared.len() {
            names.push(format!("embed.shared[{i}]"));
        }
        for i in 0..self.embedder.per_class.len() {
            names.push(format!("embed.per_class[{i}]"));
        }
        for (b, block) in self.blocks.iter().enumerate() {
            block.param_names(&format!("block[{b}]"), &mut names);
        }
        self.head.param_names("head", &mut names);
        names
    }

    /// Rebuilds gradient buffers after deserialization.
    pub fn restore_after_load(&mut self) {
        for p in self.params_mut() {
            p.restore_grad();
        }
    }

    /// Training-path loss of one batch without dropout: deterministic,
    /// used by the finite-difference gradient checks.
    pub fn batch_loss(&self, ds: &Dataset, weights: Option<&[f64]>) -> Result<f64> {
        let features = self.extract_features(ds)?;
        let logits = self.head.forward_eval(&features);
        let labels: Vec<usize> = ds.labels.iter().map(|&l| l as usize).collect();
        Ok(cross_entropy(&logits, &labels, weights)?.0)
    }

    /// Like [`Self::batch_loss`] but also populates every parameter's
    /// gradient (on top of whatever is already accumulated).
    pub fn batch_loss_and_grads(&mut self, ds: &Dataset, weights: Option<&[f64]>) -> Result<f64> {
        train::forward_backward_batch(self, ds, &(0..ds.n_rows()).collect::<Vec<_>>(), weights, None)
    }
}
