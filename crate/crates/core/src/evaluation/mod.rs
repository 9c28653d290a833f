//! Verification metrics, the raw-distance baseline, score normalization,
//! sum fusion over modality subsets, contribution analysis and reports.

mod baseline;
mod fusion;
mod metrics;
pub mod report;
mod scores;

pub use baseline::{baseline_from_scores, euclidean_baseline};
pub use fusion::{
    aggregate, contribution, enumerate_subsets, fit_min_max, fuse_sum, normalize_scores,
    subset_label, FusionReport, MetricStats, MinMax, NormalizedScores, SubsetResult,
};
pub use metrics::{
    eer, roc_summary, tar_at_far, tar_at_threshold, OperatingPoint, RocSummary, ScoreSet,
    FAR_TARGETS,
};
pub use scores::{distance_to_score, score_pairs};
pub use report::{
    write_atomic, ContributionRow, EvaluationReport, ModalityResult, RunManifest, SweepEntry,
    SweepOutcome,
};
