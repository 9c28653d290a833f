//! Stacked-LSTM Siamese embedding network, trained from scratch.
//!
//! Everything is `f64`. Gradients come from hand-written backpropagation
//! through time; [`gradcheck`] provides the central-difference reference.

mod adam;
pub mod gradcheck;
mod loss;
mod lstm;
mod model;

pub use adam::{AdamConfig, AdamState};
pub use loss::{contrastive_loss, contrastive_loss_grad};
pub use lstm::{lstm_layer_forward, LstmParams, LstmTrace};
pub use model::{
    batch_gradient, batch_loss, clip_global_norm, embed, embed_matrix, init_params, pair_distance,
    pair_gradient, Embedding, Gradients, SiameseModel,
};
