use ndarray::{s, Array2};

use super::{dft_magnitude, Segment};
use crate::dataset::{Modality, UserId};
use crate::error::Result;

/// A segment in model-input form: `T x D'` with `D' = 2D` for movement
/// modalities (time columns, then per-channel DFT magnitudes) and `D' = D`
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSegment {
    pub user_id: UserId,
    pub modality: Modality,
    pub start_index: usize,
    pub start_time: i64,
    pub features: Array2<f64>,
}

impl FeatureSegment {
    pub fn window(&self) -> usize {
        self.features.nrows()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }
}

pub fn assemble_features(segment: &Segment, modality_is_movement: bool) -> Result<FeatureSegment> {
    let (t, d) = segment.values.dim();
    let features = if modality_is_movement {
        let mut out = Array2::zeros((t, 2 * d));
        out.slice_mut(s![.., ..d]).assign(&segment.values);
        for c in 0..d {
            let column: Vec<f64> = segment.values.column(c).to_vec();
            let mag = dft_magnitude(&column)?;
            for (r, m) in mag.into_iter().enumerate() {
                out[[r, d + c]] = m;
            }
        }
        out
    } else {
        if let Some((i, _)) = segment.values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(crate::Error::MalformedInput {
                index: i.0,
                reason: "non-finite segment value".into(),
            });
        }
        segment.values.clone()
    };
    Ok(FeatureSegment {
        user_id: segment.user_id.clone(),
        modality: segment.modality,
        start_index: segment.start_index,
        start_time: segment.start_time,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn seg(modality: Modality, values: Array2<f64>) -> Segment {
        Segment {
            user_id: UserId::new("u0"),
            modality,
            start_index: 0,
            start_time: 0,
            values,
        }
    }

    #[test]
    fn keystroke_passes_through() {
        let v = Array::from_shape_fn((5, 3), |(i, j)| (i + j) as f64 * 0.1);
        let f = assemble_features(&seg(Modality::Keystroke, v.clone()), false).unwrap();
        assert_eq!(f.features, v);
        assert_eq!(f.width(), 3);
    }

    #[test]
    fn constant_columns_have_dc_only() {
        let v = Array::from_shape_fn((8, 3), |(_, j)| j as f64 + 1.0);
        let f = assemble_features(&seg(Modality::Gyroscope, v), true).unwrap();
        assert_eq!(f.width(), 6);
        for c in 3..6 {
            assert!((f.features[[0, c]] - 8.0 * (c - 2) as f64).abs() < 1e-12);
            for r in 1..8 {
                assert!(f.features[[r, c]].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_movement_columns_match_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = Array::from_shape_fn((20, 3), |_| rng.random_range(-2.0..2.0));
        let f = assemble_features(&seg(Modality::Accelerometer, v.clone()), true).unwrap();
        assert_eq!(f.features.slice(s![.., ..3]), v);
        for c in 0..3 {
            for k in 0..20 {
                let (mut re, mut im) = (0.0, 0.0);
                for t in 0..20 {
                    let a = -2.0 * PI * (k * t) as f64 / 20.0;
                    re += v[[t, c]] * a.cos();
                    im += v[[t, c]] * a.sin();
                }
                let want = re.hypot(im);
                assert!((f.features[[k, 3 + c]] - want).abs() < 1e-9);
            }
        }
    }
}
