//! Sensor records, corpus file I/O, synthetic data, pairs and folds.

mod folds;
mod io;
mod modality;
mod pairs;
mod streams;
mod synth;

pub use folds::{split_folds, FoldSpec};
pub use io::{
    corpus_digest, corpus_hash, load_corpus, load_records, parse_records, save_corpus, save_records,
    write_records, CorpusManifest, MANIFEST_FILE, RECORD_EXTENSION,
};
pub use modality::{Modality, ModalityDescriptor};
pub use pairs::{make_pairs, pair_indices, IndexPair, PairLabel, SegmentPair};
pub use streams::{aggregate_per_second, segment_records, split_runs, Run};
pub use synth::{generate_synthetic, profiles, SynthConfig, UserProfile};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Opaque user identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        UserId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One timestamped measurement. User and modality live on the owning
/// stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub channels: Vec<f64>,
}

/// Record streams keyed by `(user, modality)`, each non-decreasing in time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub streams: BTreeMap<(UserId, Modality), Vec<SensorRecord>>,
}

impl Corpus {
    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn users(&self) -> Vec<UserId> {
        let mut users: Vec<UserId> = self.streams.keys().map(|(u, _)| u.clone()).collect();
        users.dedup();
        users
    }

    pub fn modalities(&self) -> Vec<Modality> {
        let mut ms: Vec<Modality> = self.streams.keys().map(|(_, m)| *m).collect();
        ms.sort();
        ms.dedup();
        ms
    }

    pub fn stream(&self, user: &UserId, modality: Modality) -> Option<&[SensorRecord]> {
        self.streams
            .get(&(user.clone(), modality))
            .map(Vec::as_slice)
    }

    pub fn record_count(&self) -> usize {
        self.streams.values().map(Vec::len).sum()
    }
}
