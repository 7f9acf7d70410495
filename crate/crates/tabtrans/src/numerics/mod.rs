//! Dense numeric kernels with hand-written backward passes, the Adam
//! optimizer, and the seeded PRNG that makes every stochastic stage of
//! the pipeline reproducible from a single master seed.

mod adam;
mod kernels;
mod matrix;
mod rng;

pub use adam::{AdamState, WeightDecayMode};
pub use kernels::{
    cross_entropy, cross_entropy_backward, dropout_mask, layer_norm, layer_norm_backward,
    relu, relu_backward, softmax_rows, softmax_rows_backward, LayerNormCache,
};
pub use matrix::{Matrix, Param};
pub use rng::{derive_seed, Rng};

/// Fixed stream tags so independent consumers of the master seed never
/// collide. Children are derived with [`derive_seed`].
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const TRANSFORMER_INIT: u64 = 2;
    pub const TRANSFORMER_TRAIN: u64 = 3;
    pub const SMOTE: u64 = 4;
    pub const FOREST: u64 = 5;
    pub const TUNE: u64 = 6;
    pub const FIXTURE: u64 = 7;
    pub const MLP: u64 = 8;
    pub const BOOST: u64 = 9;
}
