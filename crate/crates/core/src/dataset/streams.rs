use ndarray::Array2;

use super::{Modality, SensorRecord, UserId};
use crate::error::{Error, Result};
use crate::signal::{segment_stream, Segment};

/// A contiguous 1 Hz run of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    /// Index of the first row in the aggregated stream.
    pub start_index: usize,
    pub start_time: i64,
    pub values: Array2<f64>,
}

/// Collapses records sharing a timestamp into their mean channel vector,
/// placing event-driven modalities (keystrokes) on the 1 Hz grid.
pub fn aggregate_per_second(records: &[SensorRecord]) -> Vec<SensorRecord> {
    let mut out: Vec<SensorRecord> = Vec::with_capacity(records.len());
    let mut count = 0usize;
    for r in records {
        match out.last_mut() {
            Some(last) if last.timestamp == r.timestamp => {
                for (acc, v) in last.channels.iter_mut().zip(&r.channels) {
                    *acc += v;
                }
                count += 1;
            }
            _ => {
                finish_mean(out.last_mut(), count);
                out.push(r.clone());
                count = 1;
            }
        }
    }
    finish_mean(out.last_mut(), count);
    out
}

fn finish_mean(record: Option<&mut SensorRecord>, count: usize) {
    if let Some(r) = record {
        if count > 1 {
            for v in &mut r.channels {
                *v /= count as f64;
            }
        }
    }
}

/// Splits a 1 Hz stream wherever consecutive timestamps are more than one
/// second apart.
pub fn split_runs(samples: &[SensorRecord]) -> Result<Vec<Run>> {
    let mut runs = Vec::new();
    let mut begin = 0;
    for i in 1..=samples.len() {
        let boundary = i == samples.len() || samples[i].timestamp - samples[i - 1].timestamp > 1;
        if i < samples.len() && samples[i].timestamp <= samples[i - 1].timestamp {
            return Err(Error::Ordering {
                line: i + 1,
                previous: samples[i - 1].timestamp,
                current: samples[i].timestamp,
            });
        }
        if boundary {
            let slice = &samples[begin..i];
            let width = slice[0].channels.len();
            let mut values = Array2::zeros((slice.len(), width));
            for (r, rec) in slice.iter().enumerate() {
                if rec.channels.len() != width {
                    return Err(Error::Shape {
                        context: "record channels",
                        expected: width,
                        actual: rec.channels.len(),
                    });
                }
                for (c, v) in rec.channels.iter().enumerate() {
                    values[[r, c]] = *v;
                }
            }
            runs.push(Run {
                start_index: begin,
                start_time: slice[0].timestamp,
                values,
            });
            begin = i;
        }
    }
    Ok(runs)
}

/// Aggregates, splits at gaps and windows each run independently, so no
/// segment spans a chronological gap.
pub fn segment_records(
    user: &UserId,
    modality: Modality,
    records: &[SensorRecord],
    window: usize,
    shift: usize,
) -> Result<Vec<Segment>> {
    let grid = aggregate_per_second(records);
    let mut segments = Vec::new();
    for run in split_runs(&grid)? {
        let windows = segment_stream(run.values.view(), window, shift).map_err(|e| match e {
            Error::MalformedInput { index, reason } => Error::MalformedInput {
                index: run.start_index + index,
                reason,
            },
            other => other,
        })?;
        segments.extend(windows.into_iter().map(|w| Segment {
            user_id: user.clone(),
            modality,
            start_index: run.start_index + w.start,
            start_time: run.start_time + w.start as i64,
            values: w.values,
        }));
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: i64, v: f64) -> SensorRecord {
        SensorRecord {
            timestamp: t,
            channels: vec![v, -v, 2.0 * v],
        }
    }

    #[test]
    fn keystrokes_average_within_second() {
        let recs = vec![rec(1, 1.0), rec(1, 3.0), rec(2, 5.0), rec(4, 0.0), rec(4, 1.0), rec(4, 2.0)];
        let g = aggregate_per_second(&recs);
        assert_eq!(g.len(), 3);
        assert_eq!(g[0].channels, vec![2.0, -2.0, 4.0]);
        assert_eq!(g[1].channels, vec![5.0, -5.0, 10.0]);
        assert_eq!(g[2].channels, vec![1.0, -1.0, 2.0]);
    }

    #[test]
    fn gap_splits_runs_and_windows() {
        // 0..8 then a 10 s jump, then 18..23
        let mut recs: Vec<SensorRecord> = (0..8).map(|t| rec(t, t as f64)).collect();
        recs.extend((18..23).map(|t| rec(t, t as f64)));
        let runs = split_runs(&recs).unwrap();
        assert_eq!(runs.len(), 2);
        let segs = segment_records(&UserId::new("u"), Modality::Keystroke, &recs, 3, 1).unwrap();
        // first run: 8 samples -> 6 windows starting 0..5; second: 5 -> 3 windows at 18..20
        let starts: Vec<i64> = segs.iter().map(|s| s.start_time).collect();
        assert_eq!(starts, vec![0, 1, 2, 3, 4, 5, 18, 19, 20]);
        for s in &segs {
            let ts: Vec<f64> = s.values.column(0).to_vec();
            for w in ts.windows(2) {
                assert_eq!(w[1] - w[0], 1.0, "segment spans a gap");
            }
        }
        assert_eq!(segs[6].start_index, 8);
    }

    #[test]
    fn duplicate_timestamps_after_aggregation_rejected() {
        let recs = vec![rec(5, 1.0), rec(4, 1.0)];
        assert!(matches!(split_runs(&recs), Err(Error::Ordering { .. })));
    }
}
