//! Sliding-window segmentation and time+frequency feature assembly.

mod dft;
mod features;

pub use dft::dft_magnitude;
pub use features::{assemble_features, FeatureSegment};

use ndarray::{s, Array2, ArrayView2};

use crate::dataset::{Modality, UserId};
use crate::error::{Error, Result};

/// A `T x D` window of one modality's 1 Hz stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub user_id: UserId,
    pub modality: Modality,
    /// Ordinal position of the first row in the source stream.
    pub start_index: usize,
    /// Timestamp (seconds) of the first row.
    pub start_time: i64,
    pub values: Array2<f64>,
}

impl Segment {
    pub fn window(&self) -> usize {
        self.values.nrows()
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }
}

/// One window cut from a stream: rows `start..start + T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start: usize,
    pub values: Array2<f64>,
}

/// Number of windows of size `window` with stride `shift` that fit in `len`
/// samples.
pub fn window_count(len: usize, window: usize, shift: usize) -> usize {
    if window == 0 || shift == 0 || len < window {
        0
    } else {
        (len - window) / shift + 1
    }
}

/// Cuts `samples` (`L` rows of `D` channels) into overlapping windows.
///
/// Window `k` covers rows `[k * shift, k * shift + window)`. A stream
/// shorter than the window yields no windows.
pub fn segment_stream(
    samples: ArrayView2<'_, f64>,
    window: usize,
    shift: usize,
) -> Result<Vec<Window>> {
    if window == 0 || shift == 0 {
        return Err(Error::Contract(format!(
            "window ({window}) and shift ({shift}) must be positive"
        )));
    }
    if samples.ncols() == 0 {
        return Err(Error::Contract("stream has zero channels".into()));
    }
    for (index, row) in samples.outer_iter().enumerate() {
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::MalformedInput {
                index,
                reason: format!("non-finite sample value {v}"),
            });
        }
    }
    let n = window_count(samples.nrows(), window, shift);
    Ok((0..n)
        .map(|k| {
            let start = k * shift;
            Window {
                start,
                values: samples.slice(s![start..start + window, ..]).to_owned(),
            }
        })
        .collect())
}
