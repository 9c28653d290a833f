use crate::error::{Error, Result};

/// FAR operating points reported throughout: 1% and 0.1%.
pub const FAR_TARGETS: [f64; 2] = [0.01, 0.001];

/// Genuine and impostor similarity scores (higher means more likely
/// genuine) for one modality or fused subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub label: String,
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    /// Identifies the pair roster the scores were computed on; fusion
    /// refuses to combine sets from different rosters.
    pub roster: u64,
}

impl ScoreSet {
    pub fn new(label: impl Into<String>, genuine: Vec<f64>, impostor: Vec<f64>) -> Self {
        ScoreSet { label: label.into(), genuine, impostor, roster: 0 }
    }

    pub fn with_roster(mut self, roster: u64) -> Self {
        self.roster = roster;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::Contract(format!(
                "score set '{}' needs genuine and impostor scores ({} / {})",
                self.label,
                self.genuine.len(),
                self.impostor.len()
            )));
        }
        if self.genuine.iter().chain(&self.impostor).any(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("score set '{}' has non-finite scores", self.label)));
        }
        Ok(())
    }

    pub fn all_scores(&self) -> impl Iterator<Item = &f64> {
        self.genuine.iter().chain(&self.impostor)
    }
}

/// Threshold and resulting rates at one FAR target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    /// Percentage of genuine scores strictly above the threshold.
    pub tar: f64,
    /// Realized fraction of impostor scores strictly above the threshold.
    pub far: f64,
}

/// Percentage of `genuine` scores strictly above `threshold`.
pub fn tar_at_threshold(genuine: &[f64], threshold: f64) -> f64 {
    100.0 * genuine.iter().filter(|&&s| s > threshold).count() as f64 / genuine.len() as f64
}

/// The smallest threshold whose impostor acceptance rate (scores strictly
/// above it) does not exceed `far_target`, and the TAR there.
pub fn tar_at_far(scores: &ScoreSet, far_target: f64) -> Result<OperatingPoint> {
    scores.validate()?;
    if !(far_target > 0.0 && far_target < 1.0) {
        return Err(Error::Contract(format!("FAR target must lie in (0, 1), got {far_target}")));
    }
    let mut imp = scores.impostor.clone();
    imp.sort_by(|a, b| b.total_cmp(a));
    let n = imp.len();
    // k = largest count with k / n <= target
    let mut k = ((far_target * n as f64).floor() as usize).min(n - 1);
    while k + 1 < n && (k + 1) as f64 / n as f64 <= far_target {
        k += 1;
    }
    while k > 0 && k as f64 / n as f64 > far_target {
        k -= 1;
    }
    // with threshold imp[k], at most k impostors (those strictly larger) pass;
    // any smaller threshold admits at least k + 1
    let threshold = imp[k];
    let accepted = imp.iter().take_while(|&&s| s > threshold).count();
    Ok(OperatingPoint {
        threshold,
        tar: tar_at_threshold(&scores.genuine, threshold),
        far: accepted as f64 / n as f64,
    })
}

/// Equal error rate in percent.
///
/// Thresholds sweep the distinct pooled scores (preceded by `-inf`, where
/// FAR = 1 and FRR = 0). FAR counts impostors strictly above the threshold,
/// FRR genuines at or below it. The EER is read at the first threshold
/// where FRR reaches FAR, linearly interpolating the FAR - FRR difference
/// from the previous threshold when the crossing falls between the two.
pub fn eer(scores: &ScoreSet) -> Result<f64> {
    scores.validate()?;
    let mut gen = scores.genuine.clone();
    let mut imp = scores.impostor.clone();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let mut pooled: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let (ng, ni) = (gen.len() as f64, imp.len() as f64);

    let (mut prev_far, mut prev_frr) = (1.0, 0.0);
    let (mut gi, mut ii) = (0usize, 0usize);
    for &t in &pooled {
        while gi < gen.len() && gen[gi] <= t {
            gi += 1;
        }
        while ii < imp.len() && imp[ii] <= t {
            ii += 1;
        }
        let far = (imp.len() - ii) as f64 / ni;
        let frr = gi as f64 / ng;
        if frr >= far {
            return Ok(100.0 * crossing(prev_far, prev_frr, far, frr));
        }
        prev_far = far;
        prev_frr = frr;
    }
    // FRR reaches 1 and FAR 0 at the largest pooled score, so the loop returns
    unreachable!("FAR/FRR curves always cross")
}

/// Interpolated rate where `far - frr` changes sign between two
/// consecutive thresholds.
pub(crate) fn crossing(far0: f64, frr0: f64, far1: f64, frr1: f64) -> f64 {
    let (d0, d1) = (far0 - frr0, far1 - frr1);
    if d1 == 0.0 {
        return far1;
    }
    let w = d0 / (d0 - d1);
    far0 + w * (far1 - far0)
}

/// TAR at 1% and 0.1% FAR plus EER, all in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocSummary {
    pub tar_at_far_1pct: f64,
    pub tar_at_far_0p1pct: f64,
    pub eer: f64,
    pub threshold_1pct: f64,
    pub threshold_0p1pct: f64,
    /// Every score identical: the metrics carry no information.
    pub degenerate: bool,
}

pub fn roc_summary(scores: &ScoreSet) -> Result<RocSummary> {
    let p1 = tar_at_far(scores, FAR_TARGETS[0])?;
    let p01 = tar_at_far(scores, FAR_TARGETS[1])?;
    let first = scores.genuine[0];
    Ok(RocSummary {
        tar_at_far_1pct: p1.tar,
        tar_at_far_0p1pct: p01.tar,
        eer: eer(scores)?,
        threshold_1pct: p1.threshold,
        threshold_0p1pct: p01.threshold,
        degenerate: scores.all_scores().all(|&s| s == first),
    })
}
