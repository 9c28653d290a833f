use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::FeatureSegment;

/// `y = 0` for two segments of the same user, `y = 1` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairLabel {
    Genuine,
    Impostor,
}

impl PairLabel {
    pub fn y(self) -> f64 {
        match self {
            PairLabel::Genuine => 0.0,
            PairLabel::Impostor => 1.0,
        }
    }

    pub fn is_genuine(self) -> bool {
        self == PairLabel::Genuine
    }
}

/// Pair of `(group, item)` positions into grouped segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexPair {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub label: PairLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPair {
    pub a: FeatureSegment,
    pub b: FeatureSegment,
    pub label: PairLabel,
}

/// Builds genuine and impostor pairs over groups of the given sizes (one
/// group per user).
///
/// Genuine pairs are all within-group pairs, uniformly subsampled to
/// `max_genuine_per_user` when the cap binds. Each retained genuine pair's
/// left item is paired with a uniformly chosen item of a uniformly chosen
/// other non-empty group, so impostors match genuines one for one. Output
/// lists all genuine pairs (group order) followed by the impostors.
pub fn pair_indices(group_sizes: &[usize], max_genuine_per_user: usize, seed: u64) -> Result<Vec<IndexPair>> {
    let non_empty: Vec<usize> = (0..group_sizes.len()).filter(|&g| group_sizes[g] > 0).collect();
    if non_empty.len() < 2 {
        return Err(Error::Contract(format!(
            "pairing needs at least 2 users with segments, found {}",
            non_empty.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut genuine = Vec::new();
    for (g, &n) in group_sizes.iter().enumerate() {
        if n < 2 {
            continue;
        }
        let total = n * (n - 1) / 2;
        let chosen: Vec<usize> = if total > max_genuine_per_user {
            let mut idx = sample(&mut rng, total, max_genuine_per_user).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..total).collect()
        };
        genuine.extend(
            triangular_pairs(n, &chosen)
                .into_iter()
                .map(|(i, j)| IndexPair { a: (g, i), b: (g, j), label: PairLabel::Genuine }),
        );
    }
    if genuine.is_empty() {
        return Err(Error::Empty("no user has at least 2 segments; no genuine pairs".into()));
    }
    let mut impostors = Vec::with_capacity(genuine.len());
    for p in &genuine {
        let g = p.a.0;
        let others: Vec<usize> = non_empty.iter().copied().filter(|&o| o != g).collect();
        let other = others[rng.random_range(0..others.len())];
        let item = rng.random_range(0..group_sizes[other]);
        impostors.push(IndexPair { a: p.a, b: (other, item), label: PairLabel::Impostor });
    }
    genuine.extend(impostors);
    Ok(genuine)
}

/// Maps sorted linear indices of the strict upper triangle of an `n x n`
/// matrix (row-major) to `(i, j)` with `i < j`.
fn triangular_pairs(n: usize, sorted: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sorted.len());
    let (mut row, mut row_start) = (0usize, 0usize);
    for &p in sorted {
        while p >= row_start + (n - 1 - row) {
            row_start += n - 1 - row;
            row += 1;
        }
        out.push((row, row + 1 + (p - row_start)));
    }
    out
}

/// [`pair_indices`] materialized over segments grouped by user.
pub fn make_pairs(
    groups: &[Vec<FeatureSegment>],
    max_genuine_per_user: usize,
    seed: u64,
) -> Result<Vec<SegmentPair>> {
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    Ok(pair_indices(&sizes, max_genuine_per_user, seed)?
        .into_iter()
        .map(|p| SegmentPair {
            a: groups[p.a.0][p.a.1].clone(),
            b: groups[p.b.0][p.b.1].clone(),
            label: p.label,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Modality, UserId};
    use ndarray::Array2;
    use std::collections::HashSet;

    fn segs(user: &str, n: usize) -> Vec<FeatureSegment> {
        (0..n)
            .map(|i| FeatureSegment {
                user_id: UserId::new(user),
                modality: Modality::Gps,
                start_index: i,
                start_time: i as i64,
                features: Array2::zeros((2, 2)),
            })
            .collect()
    }

    #[test]
    fn triangular_enumeration() {
        let all: Vec<usize> = (0..10).collect();
        let got = triangular_pairs(5, &all);
        let want: Vec<(usize, usize)> =
            (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn counting_three_and_one() {
        let pairs = make_pairs(&[segs("a", 3), segs("b", 1)], 2000, 1).unwrap();
        let g = pairs.iter().filter(|p| p.label.is_genuine()).count();
        assert_eq!((g, pairs.len() - g), (3, 3));
        for p in pairs.iter().filter(|p| !p.label.is_genuine()) {
            assert_eq!(p.b.user_id.as_str(), "b");
        }
    }

    #[test]
    fn cap_of_one() {
        let pairs = pair_indices(&[5, 4, 1, 7], 1, 3).unwrap();
        let genuine: Vec<_> = pairs.iter().filter(|p| p.label.is_genuine()).collect();
        let groups: Vec<usize> = genuine.iter().map(|p| p.a.0).collect();
        assert_eq!(groups, vec![0, 1, 3]);
        assert_eq!(pairs.len(), 6);
    }

    #[test]
    fn no_eligible_user() {
        assert!(matches!(pair_indices(&[1, 1, 1], 10, 0), Err(Error::Empty(_))));
        assert!(matches!(pair_indices(&[5], 10, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn label_audit_over_many_pairs() {
        let groups: Vec<Vec<FeatureSegment>> =
            (0..6).map(|u| segs(&format!("u{u}"), 40 + 7 * u)).collect();
        let pairs = make_pairs(&groups, 900, 42).unwrap();
        assert!(pairs.len() >= 10_000);
        for p in &pairs {
            match p.label {
                PairLabel::Genuine => assert_eq!(p.a.user_id, p.b.user_id),
                PairLabel::Impostor => assert_ne!(p.a.user_id, p.b.user_id),
            }
            assert_eq!(p.a.modality, p.b.modality);
        }
        // subsampled genuine pairs are distinct
        let genuine: HashSet<_> = pairs
            .iter()
            .filter(|p| p.label.is_genuine())
            .map(|p| (p.a.user_id.clone(), p.a.start_index, p.b.start_index))
            .collect();
        assert_eq!(genuine.len() * 2, pairs.len());
    }

    #[test]
    fn seed_determinism() {
        assert_eq!(pair_indices(&[30, 20], 50, 9).unwrap(), pair_indices(&[30, 20], 50, 9).unwrap());
        assert_ne!(pair_indices(&[30, 20], 50, 9).unwrap(), pair_indices(&[30, 20], 50, 10).unwrap());
    }
}
