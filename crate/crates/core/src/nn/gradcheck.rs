//! Central-difference gradients of the mean contrastive loss, used to
//! verify backpropagation.

use super::model::{batch_loss, Gradients, SiameseModel};
use crate::dataset::SegmentPair;
use crate::error::Result;

/// Numerical gradient of [`batch_loss`] by central differences with
/// `step`, in the same layout as [`Gradients`].
pub fn finite_difference_gradient(
    model: &SiameseModel,
    pairs: &[SegmentPair],
    step: f64,
) -> Result<Gradients> {
    let mut probe = model.clone();
    let mut out = Gradients::zeros_like(model);
    let n = model.param_count();
    for i in 0..n {
        let orig = *probe.params_mut().nth(i).expect("index in range");
        *probe.params_mut().nth(i).unwrap() = orig + step;
        let up = batch_loss(&probe, pairs)?;
        *probe.params_mut().nth(i).unwrap() = orig - step;
        let down = batch_loss(&probe, pairs)?;
        *probe.params_mut().nth(i).unwrap() = orig;
        *out.values_mut().nth(i).unwrap() = (up - down) / (2.0 * step);
    }
    Ok(out)
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`. The floor keeps
/// entries near zero from being judged on round-off alone.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Largest relative error between two gradient containers.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients, floor: f64) -> f64 {
    analytic
        .values()
        .zip(numeric.values())
        .map(|(&a, &n)| relative_error(a, n, floor))
        .fold(0.0, f64::max)
}
