//! Structured (JSON lines) and human-readable evaluation reports.
//!
//! Every JSONL record carries the id of the [`RunManifest`] that produced
//! it. Reports hold no wall-clock data, so identical runs give identical
//! bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::fusion::{aggregate, FusionReport, MetricStats};
use super::metrics::RocSummary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub corpus_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>, corpus_hash: String, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            corpus_hash,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn id(&self) -> String {
        let text = serde_json::to_string(self).expect("manifest serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityResult {
    pub label: String,
    pub per_fold: Vec<RocSummary>,
    pub baseline_per_fold: Vec<RocSummary>,
}

impl ModalityResult {
    /// TAR@1%, TAR@0.1%, EER over folds.
    pub fn stats(&self) -> [MetricStats; 3] {
        aggregate(&self.per_fold)
    }

    pub fn baseline_stats(&self) -> [MetricStats; 3] {
        aggregate(&self.baseline_per_fold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRow {
    pub label: String,
    pub tar_all: f64,
    pub tar_without: f64,
    /// `None` when `tar_without` is 100.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Skipped(String),
    Done {
        /// Mean/std TAR@0.1%FAR per modality.
        per_modality: Vec<(String, MetricStats)>,
        /// All modalities fused, when more than one was evaluated.
        fused: Option<MetricStats>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub window: usize,
    pub outcome: SweepOutcome,
}

impl SweepEntry {
    pub fn fused_tar(&self) -> Option<f64> {
        match &self.outcome {
            SweepOutcome::Done { fused, .. } => fused.map(|s| s.mean),
            SweepOutcome::Skipped(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationReport {
    pub window: usize,
    pub folds: usize,
    pub modalities: Vec<ModalityResult>,
    /// Modalities left out of fusion for a degenerate reference range.
    pub excluded: Vec<String>,
    pub fusion: Option<FusionReport>,
    pub contributions: Vec<ContributionRow>,
    pub sweep: Vec<SweepEntry>,
}

fn r2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn r4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn metric_fields(fields: &mut Map<String, Value>, tar1: f64, tar01: f64, eer: f64) {
    fields.insert("tar_far_1".into(), json!(r2(tar1)));
    fields.insert("tar_far_0.1".into(), json!(r2(tar01)));
    fields.insert("eer".into(), json!(r2(eer)));
}

impl EvaluationReport {
    fn record(&self, id: &str, section: &str, label: &str, fold: Value) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("manifest_id".into(), json!(id));
        m.insert("section".into(), json!(section));
        m.insert("label".into(), json!(label));
        m.insert("fold".into(), fold);
        m.insert("T".into(), json!(self.window));
        m
    }

    fn summary_rows(&self, out: &mut Vec<Value>, id: &str, section: &str, label: &str, per_fold: &[RocSummary], extra: &[(&str, Value)]) {
        let push = |out: &mut Vec<Value>, fold: Value, t1: f64, t01: f64, e: f64, degenerate: Option<bool>| {
            let mut m = self.record(id, section, label, fold);
            for (k, v) in extra {
                m.insert((*k).into(), v.clone());
            }
            metric_fields(&mut m, t1, t01, e);
            if let Some(d) = degenerate {
                m.insert("degenerate".into(), json!(d));
            }
            out.push(Value::Object(m));
        };
        for (f, r) in per_fold.iter().enumerate() {
            push(out, json!(f), r.tar_at_far_1pct, r.tar_at_far_0p1pct, r.eer, Some(r.degenerate));
        }
        let s = aggregate(per_fold);
        push(out, json!("mean"), s[0].mean, s[1].mean, s[2].mean, None);
        push(out, json!("std"), s[0].std, s[1].std, s[2].std, None);
    }

    /// One JSON object per line: the manifest first, then metric records.
    pub fn to_jsonl(&self, manifest: &RunManifest) -> String {
        let id = manifest.id();
        let mut rows = Vec::new();
        let mut header = serde_json::to_value(manifest).expect("manifest serializes");
        header["record"] = json!("manifest");
        header["manifest_id"] = json!(id);
        rows.push(header);

        for m in &self.modalities {
            self.summary_rows(&mut rows, &id, "modality", &m.label, &m.per_fold, &[]);
            self.summary_rows(&mut rows, &id, "baseline", &m.label, &m.baseline_per_fold, &[]);
        }
        for label in &self.excluded {
            let mut r = self.record(&id, "fusion_excluded", label, Value::Null);
            r.insert("reason".into(), json!("degenerate reference score range"));
            rows.push(Value::Object(r));
        }
        if let Some(fusion) = &self.fusion {
            for s in &fusion.subsets {
                self.summary_rows(&mut rows, &id, "fusion", &s.label, &s.per_fold, &[("size", json!(s.size()))]);
            }
            for (size, tar) in &fusion.per_size_mean_tar {
                let mut r = self.record(&id, "fusion_size", &format!("size {size}"), json!("mean"));
                r.insert("size".into(), json!(size));
                r.insert("tar_far_0.1".into(), json!(r2(*tar)));
                rows.push(Value::Object(r));
            }
        }
        for c in &self.contributions {
            let mut r = self.record(&id, "contribution", &c.label, json!("mean"));
            r.insert("tar_all".into(), json!(r2(c.tar_all)));
            r.insert("tar_without".into(), json!(r2(c.tar_without)));
            r.insert("contribution".into(), c.value.map_or(Value::Null, |v| json!(r4(v))));
            r.insert("applicable".into(), json!(c.value.is_some()));
            rows.push(Value::Object(r));
        }
        for e in &self.sweep {
            match &e.outcome {
                SweepOutcome::Skipped(reason) => {
                    let mut r = self.record(&id, "sweep", "all", Value::Null);
                    r.insert("T".into(), json!(e.window));
                    r.insert("skipped".into(), json!(reason));
                    rows.push(Value::Object(r));
                }
                SweepOutcome::Done { per_modality, fused } => {
                    let fused_row = fused.map(|f| ("fused".to_string(), f));
                    for (label, s) in per_modality.iter().cloned().chain(fused_row) {
                        for (fold, v) in [("mean", s.mean), ("std", s.std)] {
                            let mut r = self.record(&id, "sweep", &label, json!(fold));
                            r.insert("T".into(), json!(e.window));
                            r.insert("tar_far_0.1".into(), json!(r2(v)));
                            rows.push(Value::Object(r));
                        }
                    }
                }
            }
        }
        let mut text = String::new();
        for r in rows {
            text.push_str(&serde_json::to_string(&r).expect("row serializes"));
            text.push('\n');
        }
        text
    }

    /// Aligned plain-text tables.
    pub fn to_table(&self, manifest: &RunManifest) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "manifest {}", manifest.id());
        let _ = writeln!(t, "command {}  corpus {}  seed {}  T={}  folds={}", manifest.command, manifest.corpus_hash, manifest.seed, self.window, self.folds);
        let pm = |s: MetricStats| format!("{:>6.2} ± {:<5.2}", s.mean, s.std);
        let header = format!("{:<28} {:>15} {:>15} {:>15}", "", "TAR@1%FAR", "TAR@0.1%FAR", "EER");

        if !self.modalities.is_empty() {
            let _ = writeln!(t, "\n== individual modalities (mean ± std over folds) ==");
            let _ = writeln!(t, "{header}");
            for m in &self.modalities {
                let s = m.stats();
                let b = m.baseline_stats();
                let _ = writeln!(t, "{:<28} {} {} {}", m.label, pm(s[0]), pm(s[1]), pm(s[2]));
                let _ = writeln!(t, "{:<28} {} {} {}", format!("  {} raw euclidean", m.label), pm(b[0]), pm(b[1]), pm(b[2]));
            }
        }
        for label in &self.excluded {
            let _ = writeln!(t, "excluded from fusion: {label} (degenerate reference score range)");
        }
        if let Some(f) = &self.fusion {
            let _ = writeln!(t, "\n== singletons ==");
            let _ = writeln!(t, "{header}");
            for s in f.subsets.iter().filter(|s| s.size() == 1) {
                let _ = writeln!(t, "{:<28} {} {} {}", s.label, pm(s.stats[0]), pm(s.stats[1]), pm(s.stats[2]));
            }
            let _ = writeln!(t, "\n== fusion: {} multi-modality subsets ==", f.multi().count());
            let _ = writeln!(t, "{header}");
            for s in f.multi() {
                let _ = writeln!(t, "{:<28} {} {} {}", s.label, pm(s.stats[0]), pm(s.stats[1]), pm(s.stats[2]));
            }
            let _ = writeln!(t, "\n== mean TAR@0.1%FAR by subset size ==");
            for (size, tar) in &f.per_size_mean_tar {
                let _ = writeln!(t, "{size:>4} {tar:>8.2}");
            }
            let (top, bottom) = f.top_bottom(3);
            for (title, rows) in [("top 3", top), ("bottom 3", bottom)] {
                let _ = writeln!(t, "\n== {title} by TAR@0.1%FAR ==");
                for s in rows {
                    let _ = writeln!(t, "{:<28} {}", s.label, pm(s.stats[1]));
                }
            }
        }
        if !self.contributions.is_empty() {
            let _ = writeln!(t, "\n== contribution ==");
            let _ = writeln!(t, "{:<8} {:>10} {:>12} {:>13}", "", "TAR all", "TAR without", "contribution");
            for c in &self.contributions {
                let v = c.value.map_or("n/a".to_string(), |v| format!("{v:.4}"));
                let _ = writeln!(t, "{:<8} {:>10.2} {:>12.2} {:>13}", c.label, c.tar_all, c.tar_without, v);
            }
        }
        if !self.sweep.is_empty() {
            let _ = writeln!(t, "\n== TAR@0.1%FAR by authentication window ==");
            for e in &self.sweep {
                match &e.outcome {
                    SweepOutcome::Skipped(reason) => {
                        let _ = writeln!(t, "T={:<3} skipped: {reason}", e.window);
                    }
                    SweepOutcome::Done { per_modality, fused } => {
                        let mut line = format!("T={:<3}", e.window);
                        for (label, s) in per_modality {
                            let _ = write!(line, " {label} {:.2}", s.mean);
                        }
                        if let Some(f) = fused {
                            let _ = write!(line, "  fused {:.2}", f.mean);
                        }
                        let _ = writeln!(t, "{line}");
                    }
                }
            }
        }
        t
    }
}

/// Writes `contents` next to `path` and renames it into place, so readers
/// never see a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roc(t: f64) -> RocSummary {
        RocSummary {
            tar_at_far_1pct: t,
            tar_at_far_0p1pct: t - 1.0,
            eer: 100.0 - t,
            threshold_1pct: -0.5,
            threshold_0p1pct: -0.2,
            degenerate: false,
        }
    }

    fn manifest() -> RunManifest {
        RunManifest::new("evaluate", BTreeMap::from([("folds".into(), "4".into())]), "abc".into(), 3)
    }

    #[test]
    fn every_line_references_the_manifest() {
        let report = EvaluationReport {
            window: 20,
            folds: 2,
            modalities: vec![ModalityResult {
                label: "Acc".into(),
                per_fold: vec![roc(90.0), roc(92.0)],
                baseline_per_fold: vec![roc(40.0), roc(42.0)],
            }],
            contributions: vec![ContributionRow { label: "Acc".into(), tar_all: 100.0, tar_without: 100.0, value: None }],
            sweep: vec![SweepEntry { window: 3, outcome: SweepOutcome::Skipped("no segments".into()) }],
            ..Default::default()
        };
        let m = manifest();
        let text = report.to_jsonl(&m);
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["record"], "manifest");
        assert!(lines.iter().all(|l| l["manifest_id"] == json!(m.id())));
        let mean = lines.iter().find(|l| l["section"] == "modality" && l["fold"] == "mean").unwrap();
        assert_eq!(mean["tar_far_1"], json!(91.0));
        let c = lines.iter().find(|l| l["section"] == "contribution").unwrap();
        assert_eq!(c["contribution"], Value::Null);
        assert_eq!(c["applicable"], json!(false));
        assert!(report.to_table(&m).contains("n/a"));
        assert_eq!(text, report.to_jsonl(&m));
    }

    #[test]
    fn manifest_id_tracks_config() {
        let a = manifest();
        let mut b = manifest();
        b.config.insert("folds".into(), "5".into());
        assert_ne!(a.id(), b.id());
        assert_eq!(a.id(), manifest().id());
    }

    #[test]
    fn atomic_write_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/report.jsonl");
        write_atomic(&p, "x\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "x\n");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
