//! Per-modality Siamese training: configuration, loop, checkpoints.

mod checkpoint;
mod config;
mod trainer;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::TrainConfig;
pub use trainer::{train_modality, train_modality_with, TrainReport};
