use super::ScoreSet;
use crate::dataset::SegmentPair;
use crate::error::Result;
use crate::exec::Execution;
use crate::nn::{pair_distance, SiameseModel};

/// Similarity from embedding distance: `s = -d`, so 0 is the best score.
pub fn distance_to_score(d: f64) -> f64 {
    -d
}

/// Scores every pair by `-d`, splitting genuine (`y = 0`) from impostor
/// pairs while keeping input order within each population.
pub fn score_pairs(model: &SiameseModel, pairs: &[SegmentPair], label: &str, exec: Execution) -> Result<ScoreSet> {
    let distances = exec.map(pairs, |p| pair_distance(model, &p.a, &p.b));
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (p, d) in pairs.iter().zip(distances) {
        let s = distance_to_score(d?);
        if p.label.is_genuine() {
            genuine.push(s);
        } else {
            impostor.push(s);
        }
    }
    Ok(ScoreSet::new(label, genuine, impostor))
}
