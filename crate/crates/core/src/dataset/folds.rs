use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::UserId;
use crate::error::{Error, Result};

/// User-disjoint train/test partition for one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    pub fold_index: usize,
    pub train_users: Vec<UserId>,
    pub test_users: Vec<UserId>,
}

impl FoldSpec {
    pub fn is_train(&self, user: &UserId) -> bool {
        self.train_users.contains(user)
    }

    pub fn is_test(&self, user: &UserId) -> bool {
        self.test_users.contains(user)
    }
}

/// Shuffles `users` once and chunks them into `k` test groups whose sizes
/// differ by at most one; each fold trains on the complement.
pub fn split_folds(users: &[UserId], k: usize, seed: u64) -> Result<Vec<FoldSpec>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if k > users.len() {
        return Err(Error::Config(format!(
            "{k} folds requested but only {} users",
            users.len()
        )));
    }
    let mut sorted = users.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != users.len() {
        return Err(Error::Config("duplicate user ids".into()));
    }
    let mut shuffled = sorted.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let (base, extra) = (shuffled.len() / k, shuffled.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold_index in 0..k {
        let size = base + usize::from(fold_index < extra);
        let mut test_users = shuffled[start..start + size].to_vec();
        test_users.sort();
        let train_users = sorted.iter().filter(|u| !test_users.contains(u)).cloned().collect();
        folds.push(FoldSpec { fold_index, train_users, test_users });
        start += size;
    }
    Ok(folds)
}
