//! From-scratch encoder-decoder: embeddings, a single-layer GRU encoder, a
//! single-layer GRU decoder with additive attention, cross-entropy loss,
//! hand-derived gradients and plain SGD.

mod backward;
mod checkpoint;
mod forward;
pub mod gradcheck;
mod model;
mod tensor;

pub use backward::{backward, backward_scaled, sgd_step};
pub use checkpoint::Checkpoint;
pub use forward::{decode_step, encode, forward_loss, forward_tokens, mean_loss, DecodeOutput, Dropout, Encoded, ForwardCache};
pub use model::{
    init_model, AttentionParams, GruParams, HyperParams, ModelState, Params, DROPOUT_RANGE, HIDDEN_RANGE,
    LEARNING_RATE_RANGE, PARAM_NAMES,
};
pub use tensor::Tensor;
