//! Passive smartphone authentication from background sensor streams.
//!
//! The pipeline windows per-modality 1 Hz streams into fixed-size segments,
//! appends per-channel DFT magnitudes for movement sensors, embeds each
//! segment with a two-layer stacked LSTM trained as a Siamese network under
//! contrastive loss, and evaluates verification performance (TAR at fixed
//! FAR, EER) per modality and under sum-score fusion of modality subsets.
//!
//! Module map:
//!
//! * [`signal`]: segmentation and time+frequency feature assembly
//! * [`nn`]: LSTM layers, Siamese embedding, contrastive loss, BPTT, Adam
//! * [`dataset`]: records, file I/O, synthetic generation, pairs, folds
//! * [`training`]: per-modality training loop, configs, checkpoints
//! * [`evaluation`]: metrics, baseline, normalization, fusion, reports
//! * [`pipeline`]: fold-wise orchestration shared by the CLI and tests
//! * [`exec`]: sequential / rayon execution switch

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod nn;
pub mod pipeline;
pub mod signal;
pub mod training;

pub use error::{Error, Result};
pub use exec::Execution;

/// Derives an independent 64-bit sub-seed from a root seed and a list of
/// labels (splitmix64 finalizer over each component).
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    let mut state = root ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        state = splitmix(state ^ splitmix(p.wrapping_add(0xD1B5_4A32_D192_ED03)));
    }
    state
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a label, for seed derivation.
pub fn label_hash(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
