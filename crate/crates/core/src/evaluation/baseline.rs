use super::metrics::{eer, tar_at_far, tar_at_threshold, RocSummary, ScoreSet, FAR_TARGETS};
use super::scores::distance_to_score;
use crate::dataset::SegmentPair;
use crate::error::{Error, Result};

/// Baseline without a learned embedding: thresholds at the FAR targets are
/// fixed on `train` scores, then applied to `test` genuine scores. EER is
/// measured on `test`.
pub fn baseline_from_scores(train: &ScoreSet, test: &ScoreSet) -> Result<RocSummary> {
    test.validate()?;
    let p1 = tar_at_far(train, FAR_TARGETS[0])?;
    let p01 = tar_at_far(train, FAR_TARGETS[1])?;
    let first = train.genuine[0];
    let degenerate = train.all_scores().chain(test.all_scores()).all(|&s| s == first);
    if degenerate {
        log::warn!("baseline '{}' is degenerate: every distance is identical", test.label);
    }
    Ok(RocSummary {
        tar_at_far_1pct: tar_at_threshold(&test.genuine, p1.threshold),
        tar_at_far_0p1pct: tar_at_threshold(&test.genuine, p01.threshold),
        eer: eer(test)?,
        threshold_1pct: p1.threshold,
        threshold_0p1pct: p01.threshold,
        degenerate,
    })
}

fn raw_scores(pairs: &[SegmentPair], label: &str) -> Result<ScoreSet> {
    let mut out = ScoreSet::new(label, Vec::new(), Vec::new());
    for p in pairs {
        let (a, b) = (&p.a.features, &p.b.features);
        if a.dim() != b.dim() {
            return Err(Error::Shape {
                context: "baseline pair elements",
                expected: a.len(),
                actual: b.len(),
            });
        }
        let d = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let s = distance_to_score(d);
        if p.label.is_genuine() {
            out.genuine.push(s);
        } else {
            out.impostor.push(s);
        }
    }
    Ok(out)
}

/// Euclidean distance between flattened raw feature segments, evaluated
/// with train-fixed thresholds.
pub fn euclidean_baseline(train_pairs: &[SegmentPair], test_pairs: &[SegmentPair]) -> Result<RocSummary> {
    let train = raw_scores(train_pairs, "baseline-train")?;
    let test = raw_scores(test_pairs, "baseline-test")?;
    baseline_from_scores(&train, &test)
}
