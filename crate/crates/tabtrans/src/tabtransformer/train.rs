use serde::{Deserialize, Serialize};

use super::TabTransformerModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{
    cross_entropy, cross_entropy_backward, derive_seed, streams, AdamState, Matrix, Rng,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
}

/// Forward + backward over one batch of dataset rows. Accumulates every
/// parameter gradient and returns the batch loss. Dropout is applied only
/// when a training RNG is supplied (and the configured rate is nonzero).
pub(super) fn forward_backward_batch(
    model: &mut TabTransformerModel,
    ds: &Dataset,
    batch_rows: &[usize],
    weights: Option<&[f64]>,
    mut rng: Option<&mut Rng>,
) -> Result<f64> {
    model.check_dataset(ds)?;
    let m = model.category_slots.len();
    let d = model.config.embed_dim;
    let ctx_width = m * d;
    let width = model.feature_width();
    let b = batch_rows.len();

    // packed encoder forward over the whole batch (m rows per sample)
    let mut h = Matrix::zeros(b * m, d);
    for (bi, &r) in batch_rows.iter().enumerate() {
        model.embedder.embed_into(ds.codes_row(r), &mut h, bi * m)?;
    }
    let mut caches = Vec::with_capacity(model.blocks.len());
    for block in &model.blocks {
        let (next, cache) = block.forward_packed(&h, m, rng.as_deref_mut());
        caches.push(cache);
        h = next;
    }

    let mut features = Matrix::zeros(b, width);
    for (bi, &r) in batch_rows.iter().enumerate() {
        features.row_mut(bi)[..ctx_width]
            .copy_from_slice(&h.data()[bi * ctx_width..(bi + 1) * ctx_width]);
        let cont = model.normalize_continuous(ds.numeric.row(r));
        features.row_mut(bi)[ctx_width..].copy_from_slice(&cont);
    }

    let batch_weights: Option<Vec<f64>> =
        weights.map(|w| batch_rows.iter().map(|&r| w[r]).collect());
    let labels: Vec<usize> = batch_rows.iter().map(|&r| ds.labels[r] as usize).collect();

    let (logits, head_cache) = model.head.forward_cached(&features, rng);
    let (loss, probs) = cross_entropy(&logits, &labels, batch_weights.as_deref())?;
    let dlogits = cross_entropy_backward(&probs, &labels, batch_weights.as_deref());
    let dfeatures = model.head.backward(&head_cache, &dlogits);

    let mut dh = Matrix::zeros(b * m, d);
    for bi in 0..b {
        dh.data_mut()[bi * ctx_width..(bi + 1) * ctx_width]
            .copy_from_slice(&dfeatures.row(bi)[..ctx_width]);
    }
    for (block, cache) in model.blocks.iter_mut().zip(&caches).rev() {
        dh = block.backward_packed(cache, m, &dh);
    }
    for (bi, &r) in batch_rows.iter().enumerate() {
        model.embedder.backward(ds.codes_row(r), &dh, bi * m);
    }
    Ok(loss)
}

/// Mini-batch Adam on cross-entropy with seeded per-epoch shuffling.
/// Returns the per-epoch loss curve; aborts with a diagnostic if the loss
/// goes non-finite.
pub fn train(
    model: &mut TabTransformerModel,
    ds: &Dataset,
    weights: Option<&[f64]>,
) -> Result<TrainReport> {
    if ds.n_rows() == 0 {
        return Err(Error::Data("transformer train: empty training set".into()));
    }
    model.check_dataset(ds)?;
    let config = model.config.clone();
    let mut rng = Rng::from_seed(derive_seed(config.seed, streams::TRANSFORMER_TRAIN));

    let mut adam = {
        let params = model.params_mut();
        let views: Vec<&crate::numerics::Param> = params.iter().map(|p| &**p).collect();
        AdamState::new(&views, config.learning_rate, config.weight_decay)
    };
    {
        let mut params = model.params_mut();
        for p in params.iter_mut() {
            p.zero_grad();
        }
    }

    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let loss = forward_backward_batch(model, ds, batch, weights, Some(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "transformer train: non-finite loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            epoch_loss += loss * batch.len() as f64;
            seen += batch.len();
            let mut params = model.params_mut();
            adam.step(&mut params);
        }
        loss_curve.push(epoch_loss / seen as f64);
    }
    Ok(TrainReport { loss_curve })
}
