//! Fully connected binarized network: sign weights, sign activations trained
//! with the hard-tanh straight-through estimator, batch norm after every
//! linear map and real-valued logits.
//!
//! Hidden weights are never clipped. Their magnitude is the consolidation
//! state read by the metaplastic update, so it must be free to grow.

mod batchnorm;
mod loss;
mod network;

pub use batchnorm::BatchNormParams;
pub use loss::{argmax_rows, cross_entropy, per_sample_nll};
pub use network::{
    binarize, sign, Activation, Evaluation, ForwardCache, Gradients, LayerParams, Mode, Network,
    WeightMode,
};
