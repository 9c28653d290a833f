use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::dataset::SegmentPair;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::{batch_gradient, clip_global_norm, init_params, AdamState, SiameseModel};

const TAG_INIT: u64 = 11;
const TAG_SHUFFLE: u64 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-pair training loss of each epoch, measured before each
    /// batch's update.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub checkpoint: Option<PathBuf>,
    pub config: TrainConfig,
    pub duration: Duration,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().expect("at least one epoch")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# training report\n");
        for (k, v) in self.epoch_losses.iter().enumerate() {
            let _ = writeln!(s, "epoch {:>4}  loss {:?}", k + 1, v);
        }
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "final_loss = {:?}", self.final_loss());
        if let Some(p) = &self.checkpoint {
            let _ = writeln!(s, "checkpoint = {}", p.display());
        }
        let _ = writeln!(s, "duration_seconds = {:.3}", self.duration.as_secs_f64());
        s.push_str("# config\n");
        s.push_str(&self.config.to_text());
        s
    }
}

pub fn train_modality(pairs: &[SegmentPair], config: &TrainConfig) -> Result<(SiameseModel, TrainReport)> {
    train_modality_with(pairs, config, Execution::default())
}

/// Trains one Siamese model on `pairs` (all from the same modality).
///
/// Pairs are reshuffled every epoch from a seed-derived permutation and
/// consumed in batches of `batch_size` (the final short batch is kept).
/// Output depends only on `(pairs, config)`.
pub fn train_modality_with(
    pairs: &[SegmentPair],
    config: &TrainConfig,
    exec: Execution,
) -> Result<(SiameseModel, TrainReport)> {
    config.validate()?;
    let first = pairs
        .first()
        .ok_or_else(|| Error::Contract("no training pairs".into()))?;
    let (modality, width, steps_t) = (first.a.modality, first.a.width(), first.a.window());
    for p in pairs {
        for s in [&p.a, &p.b] {
            if s.modality != modality {
                return Err(Error::Contract(format!(
                    "mixed modalities in training pairs: {modality} and {}",
                    s.modality
                )));
            }
            if s.width() != width {
                return Err(Error::Shape { context: "training feature width", expected: width, actual: s.width() });
            }
            if s.window() != steps_t {
                return Err(Error::Shape { context: "training window", expected: steps_t, actual: s.window() });
            }
        }
    }

    let start = Instant::now();
    let mut model = init_params(
        derive_seed(config.rng_seed, &[TAG_INIT]),
        width,
        config.embedding_width,
        config.margin,
    )?;
    let mut adam = AdamState::new(model.param_count(), config.adam());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut steps = 0;

    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            config.rng_seed,
            &[TAG_SHUFFLE, epoch as u64],
        )));
        let mut total = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let refs: Vec<&SegmentPair> = idx.iter().map(|&i| &pairs[i]).collect();
            let (loss, mut grads) = batch_gradient(&model, &refs, exec)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            if let Some(max_norm) = config.clip_norm {
                clip_global_norm(&mut grads, max_norm);
            }
            adam.step(&mut model, &grads)?;
            total += loss * refs.len() as f64;
            steps += 1;
        }
        let mean = total / pairs.len() as f64;
        log::debug!("{modality} epoch {} loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }

    let report = TrainReport {
        epoch_losses,
        steps,
        checkpoint: None,
        config: config.clone(),
        duration: start.elapsed(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_pairs, Modality, UserId};
    use crate::signal::FeatureSegment;
    use ndarray::Array2;
    use rand::Rng;

    /// Two users whose windows differ by a constant offset, light noise.
    fn toy_pairs(noise: f64, seed: u64) -> Vec<SegmentPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups: Vec<Vec<FeatureSegment>> = (0..2)
            .map(|u| {
                (0..12)
                    .map(|k| FeatureSegment {
                        user_id: UserId::new(format!("u{u}")),
                        modality: Modality::Keystroke,
                        start_index: k,
                        start_time: k as i64,
                        features: Array2::from_shape_fn((5, 3), |_| {
                            (if u == 0 { -1.0 } else { 1.0 }) + noise * rng.random_range(-1.0..1.0)
                        }),
                    })
                    .collect()
            })
            .collect();
        make_pairs(&groups, 30, seed).unwrap()
    }

    fn tiny(epochs: usize) -> TrainConfig {
        TrainConfig {
            window: 5,
            embedding_width: 4,
            batch_size: 16,
            epochs,
            learning_rate: 0.02,
            rng_seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases() {
        let pairs = toy_pairs(0.3, 1);
        let (_, report) = train_modality(&pairs, &tiny(30)).unwrap();
        assert!(report.final_loss() < report.epoch_losses[0]);
    }

    #[test]
    fn separable_corpus_reaches_near_zero() {
        let pairs = toy_pairs(0.0, 2);
        let (_, report) = train_modality(&pairs, &tiny(200)).unwrap();
        assert!(
            report.final_loss() <= 0.01 * report.epoch_losses[0],
            "{:?}",
            (report.epoch_losses[0], report.final_loss())
        );
    }

    #[test]
    fn one_step_per_epoch_for_large_batch() {
        let pairs = toy_pairs(0.3, 1);
        let cfg = TrainConfig { batch_size: pairs.len() + 5, ..tiny(3) };
        let (_, report) = train_modality(&pairs, &cfg).unwrap();
        assert_eq!(report.steps, 3);
        let cfg = TrainConfig { batch_size: 7, ..tiny(2) };
        let (_, report) = train_modality(&pairs, &cfg).unwrap();
        assert_eq!(report.steps, 2 * pairs.len().div_ceil(7));
    }

    #[test]
    fn deterministic_across_runs_and_modes() {
        let pairs = toy_pairs(0.3, 4);
        let (m1, r1) = train_modality_with(&pairs, &tiny(5), Execution::Sequential).unwrap();
        let (m2, r2) = train_modality_with(&pairs, &tiny(5), Execution::Parallel).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1.epoch_losses, r2.epoch_losses);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = tiny(1);
        assert!(matches!(train_modality(&[], &cfg), Err(Error::Contract(_))));
        let mut pairs = toy_pairs(0.3, 1);
        pairs[3].b.features = Array2::zeros((5, 2));
        assert!(matches!(train_modality(&pairs, &cfg), Err(Error::Shape { .. })));
    }

    #[test]
    fn divergence_names_batch() {
        let mut pairs = toy_pairs(0.3, 1);
        pairs[0].a.features[[0, 0]] = f64::INFINITY;
        pairs[0].b.features[[0, 0]] = f64::INFINITY;
        let cfg = TrainConfig { batch_size: 1000, ..tiny(1) };
        match train_modality(&pairs, &cfg) {
            Err(e) => assert!(e.is_numerical(), "{e}"),
            Ok(_) => panic!("expected failure"),
        }
    }
}
