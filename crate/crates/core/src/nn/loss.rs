use crate::error::{Error, Result};

/// Contrastive loss of one pair at embedding distance `d`:
/// `(1 - y) d^2 / 2 + y max(0, margin - d)^2 / 2`, with `y = 0` for a
/// genuine pair and `y = 1` for an impostor pair.
pub fn contrastive_loss(d: f64, y: f64, margin: f64) -> Result<f64> {
    check(d, y, margin)?;
    let hinge = (margin - d).max(0.0);
    Ok((1.0 - y) * 0.5 * d * d + y * 0.5 * hinge * hinge)
}

/// `dL/dd`. The hinge subgradient at `d = margin` is 0.
pub fn contrastive_loss_grad(d: f64, y: f64, margin: f64) -> Result<f64> {
    check(d, y, margin)?;
    let hinge = if d < margin { margin - d } else { 0.0 };
    Ok((1.0 - y) * d - y * hinge)
}

fn check(d: f64, y: f64, margin: f64) -> Result<()> {
    if !(d >= 0.0) {
        return Err(Error::Contract(format!("distance must be non-negative, got {d}")));
    }
    if y != 0.0 && y != 1.0 {
        return Err(Error::Contract(format!("label must be 0 or 1, got {y}")));
    }
    if !(margin > 0.0) {
        return Err(Error::Contract(format!("margin must be positive, got {margin}")));
    }
    Ok(())
}
