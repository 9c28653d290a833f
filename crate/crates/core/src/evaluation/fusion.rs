use super::metrics::{roc_summary, RocSummary, ScoreSet};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Min-max statistics of a reference (training) score population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    /// Maps into `[0, 1]`, clamping values outside the reference range.
    pub fn apply(&self, s: f64) -> f64 {
        ((s - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// `None` when the reference is degenerate (`min == max`).
pub fn fit_min_max(reference: &ScoreSet) -> Option<MinMax> {
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in reference.all_scores() {
        min = min.min(s);
        max = max.max(s);
    }
    (min < max).then_some(MinMax { min, max })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedScores {
    pub sets: Vec<ScoreSet>,
    /// Labels of sets dropped because their reference range was empty.
    pub excluded: Vec<String>,
}

/// Min-max normalizes each set with the statistics of its reference set
/// (same position in `references`).
pub fn normalize_scores(sets: &[ScoreSet], references: &[ScoreSet]) -> Result<NormalizedScores> {
    if sets.len() != references.len() {
        return Err(Error::Alignment(format!(
            "{} score sets but {} references",
            sets.len(),
            references.len()
        )));
    }
    let mut out = NormalizedScores { sets: Vec::new(), excluded: Vec::new() };
    for (set, reference) in sets.iter().zip(references) {
        match fit_min_max(reference) {
            Some(mm) => out.sets.push(ScoreSet {
                label: set.label.clone(),
                genuine: set.genuine.iter().map(|&s| mm.apply(s)).collect(),
                impostor: set.impostor.iter().map(|&s| mm.apply(s)).collect(),
                roster: set.roster,
            }),
            None => {
                log::warn!("'{}' has a degenerate reference range; excluded from fusion", set.label);
                out.excluded.push(set.label.clone());
            }
        }
    }
    Ok(out)
}

/// Sum of per-modality scores over an aligned roster.
pub fn fuse_sum(sets: &[&ScoreSet]) -> Result<ScoreSet> {
    let first = sets.first().ok_or_else(|| Error::Contract("fusion of an empty subset".into()))?;
    for s in &sets[1..] {
        if s.roster != first.roster
            || s.genuine.len() != first.genuine.len()
            || s.impostor.len() != first.impostor.len()
        {
            return Err(Error::Alignment(format!(
                "'{}' ({} genuine, {} impostor, roster {:x}) vs '{}' ({}, {}, roster {:x})",
                first.label,
                first.genuine.len(),
                first.impostor.len(),
                first.roster,
                s.label,
                s.genuine.len(),
                s.impostor.len(),
                s.roster
            )));
        }
    }
    let sum = |pick: fn(&ScoreSet) -> &Vec<f64>| -> Vec<f64> {
        (0..pick(first).len())
            .map(|i| sets.iter().map(|s| pick(s)[i]).sum())
            .collect()
    };
    Ok(ScoreSet {
        label: sets.iter().map(|s| s.label.as_str()).collect::<Vec<_>>().join("+"),
        genuine: sum(|s| &s.genuine),
        impostor: sum(|s| &s.impostor),
        roster: first.roster,
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
}

impl MetricStats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MetricStats::default();
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricStats { mean, std }
    }
}

/// Per-metric statistics over folds: TAR@1%, TAR@0.1%, EER.
pub fn aggregate(per_fold: &[RocSummary]) -> [MetricStats; 3] {
    let pick = |f: fn(&RocSummary) -> f64| MetricStats::of(&per_fold.iter().map(f).collect::<Vec<_>>());
    [
        pick(|r| r.tar_at_far_1pct),
        pick(|r| r.tar_at_far_0p1pct),
        pick(|r| r.eer),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    /// Indices into the fused label list, ascending.
    pub members: Vec<usize>,
    pub label: String,
    pub per_fold: Vec<RocSummary>,
    /// TAR@1%, TAR@0.1%, EER across folds.
    pub stats: [MetricStats; 3],
}

impl SubsetResult {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionReport {
    pub labels: Vec<String>,
    /// Singletons first, then every subset of size >= 2; within a size,
    /// lexicographic by member indices.
    pub subsets: Vec<SubsetResult>,
    /// `(size, mean TAR@0.1%FAR over all subsets of that size)`.
    pub per_size_mean_tar: Vec<(usize, f64)>,
}

impl FusionReport {
    pub fn multi(&self) -> impl Iterator<Item = &SubsetResult> {
        self.subsets.iter().filter(|s| s.size() >= 2)
    }

    pub fn find(&self, members: &[usize]) -> Option<&SubsetResult> {
        self.subsets.iter().find(|s| s.members == members)
    }

    /// All members fused.
    pub fn full(&self) -> Option<&SubsetResult> {
        self.subsets.iter().find(|s| s.size() == self.labels.len())
    }

    /// Best and worst three multi-modality subsets by mean TAR@0.1%FAR.
    pub fn top_bottom(&self, n: usize) -> (Vec<&SubsetResult>, Vec<&SubsetResult>) {
        let mut ranked: Vec<&SubsetResult> = self.multi().collect();
        ranked.sort_by(|a, b| b.stats[1].mean.total_cmp(&a.stats[1].mean));
        let top = ranked.iter().take(n).copied().collect();
        let bottom = ranked.iter().rev().take(n).copied().collect();
        (top, bottom)
    }
}

pub fn subset_label(labels: &[String], members: &[usize]) -> String {
    members.iter().map(|&i| labels[i].as_str()).collect::<Vec<_>>().join("+")
}

fn subsets_in_order(n: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    all.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all
}

/// Sum-fuses every nonempty subset of the given normalized score sets.
///
/// `per_fold[f][m]` is modality `m`'s normalized test scores in fold `f`;
/// every fold must list the same labels in the same order. With eight
/// modalities this evaluates 247 multi-modality subsets plus 8 singletons.
pub fn enumerate_subsets(per_fold: &[Vec<ScoreSet>], exec: Execution) -> Result<FusionReport> {
    let first = per_fold.first().ok_or_else(|| Error::Contract("no folds to fuse".into()))?;
    let labels: Vec<String> = first.iter().map(|s| s.label.clone()).collect();
    if labels.is_empty() {
        return Err(Error::Contract("no score sets to fuse".into()));
    }
    if labels.len() > 16 {
        return Err(Error::Contract(format!("{} modalities is too many to enumerate", labels.len())));
    }
    for fold in per_fold {
        let l: Vec<&str> = fold.iter().map(|s| s.label.as_str()).collect();
        if l != labels.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Alignment(format!("fold labels {l:?} differ from {labels:?}")));
        }
    }
    let subsets = subsets_in_order(labels.len());
    let results = exec.map(&subsets, |members| -> Result<SubsetResult> {
        let per_fold_roc = per_fold
            .iter()
            .map(|fold| {
                let chosen: Vec<&ScoreSet> = members.iter().map(|&i| &fold[i]).collect();
                roc_summary(&fuse_sum(&chosen)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SubsetResult {
            members: members.clone(),
            label: subset_label(&labels, members),
            stats: aggregate(&per_fold_roc),
            per_fold: per_fold_roc,
        })
    });
    let subsets = results.into_iter().collect::<Result<Vec<_>>>()?;
    let per_size_mean_tar = (1..=labels.len())
        .map(|k| {
            let v: Vec<f64> = subsets.iter().filter(|s| s.size() == k).map(|s| s.stats[1].mean).collect();
            (k, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    Ok(FusionReport { labels, subsets, per_size_mean_tar })
}

/// Share of the remaining error gap closed by including a modality:
/// `(TAR_all - TAR_without) / (100 - TAR_without)`, TARs in percent.
/// `None` when `TAR_without` is already 100 (undefined).
pub fn contribution(tar_all: f64, tar_without: f64) -> Result<Option<f64>> {
    for (name, v) in [("tar_all", tar_all), ("tar_without", tar_without)] {
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::Contract(format!("{name} must lie in [0, 100], got {v}")));
        }
    }
    if tar_without >= 100.0 {
        return Ok(None);
    }
    Ok(Some((tar_all - tar_without) / (100.0 - tar_without)))
}
