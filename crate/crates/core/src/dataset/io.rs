//! Line-delimited record files.
//!
//! One record per line, `user_id<TAB>modality<TAB>timestamp<TAB>v1,v2,...`,
//! UTF-8 with LF endings. Values are written in Rust's shortest round-trip
//! float form so save/load is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Corpus, Modality, SensorRecord, UserId};
use crate::error::{Error, Result};

pub const RECORD_EXTENSION: &str = "tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Renders every stream of `corpus` in record-file form.
pub fn write_records(corpus: &Corpus) -> String {
    let mut out = String::new();
    for ((user, modality), records) in &corpus.streams {
        for r in records {
            write_line(&mut out, user, *modality, r);
        }
    }
    out
}

fn write_line(out: &mut String, user: &UserId, modality: Modality, r: &SensorRecord) {
    let _ = write!(out, "{}\t{}\t{}\t", user, modality, r.timestamp);
    for (i, v) in r.channels.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

pub fn save_records(corpus: &Corpus, path: &Path) -> Result<()> {
    fs::write(path, write_records(corpus)).map_err(|e| Error::io(path, e))
}

pub fn load_records(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text)
}

/// Parses record-file text. Line numbers in errors are 1-based.
pub fn parse_records(text: &str) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        if fields[0].is_empty() {
            return Err(parse_err("empty user id".into()));
        }
        let user = UserId::new(fields[0]);
        let modality: Modality = fields[1]
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        let timestamp: i64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("bad timestamp '{}'", fields[2])))?;
        let channels = fields[3]
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(format!("bad channel value '{v}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if channels.len() != modality.channels() {
            return Err(parse_err(format!(
                "{modality} expects {} channels, found {}",
                modality.channels(),
                channels.len()
            )));
        }
        let stream = corpus.streams.entry((user, modality)).or_default();
        if let Some(prev) = stream.last() {
            if timestamp < prev.timestamp {
                return Err(Error::Ordering {
                    line: line_no,
                    previous: prev.timestamp,
                    current: timestamp,
                });
            }
        }
        stream.push(SensorRecord {
            timestamp,
            channels,
        });
    }
    Ok(corpus)
}

/// Summary written next to a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub users: Vec<String>,
    pub modalities: Vec<String>,
    /// `"user/modality"` to record count.
    pub record_counts: BTreeMap<String, usize>,
    pub corpus_hash: String,
    pub generator: BTreeMap<String, String>,
}

fn stream_file_name(user: &UserId, modality: Modality) -> String {
    format!("{user}.{modality}.{RECORD_EXTENSION}")
}

/// Writes one record file per `(user, modality)` stream plus a manifest.
/// Returns the corpus hash.
pub fn save_corpus(
    corpus: &Corpus,
    dir: &Path,
    generator: BTreeMap<String, String>,
) -> Result<String> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = stream_files(corpus);
    for (name, text) in &files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    let hash = hash_files(&files);
    let manifest = CorpusManifest {
        users: corpus.users().iter().map(ToString::to_string).collect(),
        modalities: corpus.modalities().iter().map(ToString::to_string).collect(),
        record_counts: corpus
            .streams
            .iter()
            .map(|((u, m), r)| (format!("{u}/{m}"), r.len()))
            .collect(),
        corpus_hash: hash.clone(),
        generator,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(hash)
}

fn stream_files(corpus: &Corpus) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for ((user, modality), records) in &corpus.streams {
        let mut text = String::new();
        for r in records {
            write_line(&mut text, user, *modality, r);
        }
        files.insert(stream_file_name(user, *modality), text);
    }
    files
}

/// The hash [`save_corpus`] would report for `corpus`, without writing it.
pub fn corpus_digest(corpus: &Corpus) -> String {
    hash_files(&stream_files(corpus))
}

/// Loads every record file in `dir`. Streams split across files are merged
/// in file-name order.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for (name, text) in read_record_files(dir)? {
        let part = parse_records(&text).map_err(|e| match e {
            Error::Parse { line, reason } => Error::Parse {
                line,
                reason: format!("{name}: {reason}"),
            },
            other => other,
        })?;
        for (key, mut records) in part.streams {
            let stream = corpus.streams.entry(key).or_default();
            if let (Some(prev), Some(next)) = (stream.last(), records.first()) {
                if next.timestamp < prev.timestamp {
                    return Err(Error::Ordering {
                        line: 1,
                        previous: prev.timestamp,
                        current: next.timestamp,
                    });
                }
            }
            stream.append(&mut records);
        }
    }
    Ok(corpus)
}

/// SHA-256 over the sorted record files (name and content) of a corpus
/// directory, hex encoded.
pub fn corpus_hash(dir: &Path) -> Result<String> {
    Ok(hash_files(&read_record_files(dir)?))
}

fn read_record_files(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some(RECORD_EXTENSION) {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        files.insert(name, text);
    }
    Ok(files)
}

fn hash_files(files: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (name, text) in files {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update((text.len() as u64).to_le_bytes());
        h.update(text.as_bytes());
    }
    hex::encode(h.finalize())
}
