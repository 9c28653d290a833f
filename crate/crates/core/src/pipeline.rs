//! Fold-wise evaluation of every modality: segmentation, user-disjoint
//! pairing, standardization, training (or checkpoint loading), scoring,
//! the raw baseline, fusion, contribution and the window sweep.
//!
//! Pairs are drawn over window keys `(user, start_time)` present in every
//! modality of the corpus, so each modality scores the same pair roster and
//! sum fusion is aligned by construction.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::dataset::{pair_indices, segment_records, split_folds, Corpus, FoldSpec, Modality, PairLabel, SegmentPair, UserId};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate, contribution, enumerate_subsets, euclidean_baseline, fuse_sum, normalize_scores, roc_summary,
    ContributionRow, EvaluationReport, MetricStats, ModalityResult, RocSummary, ScoreSet, SweepEntry, SweepOutcome,
};
use crate::exec::Execution;
use crate::nn::{embed, Embedding, SiameseModel};
use crate::signal::{assemble_features, FeatureSegment};
use crate::training::{load_checkpoint, save_checkpoint, train_modality_with, TrainConfig, TrainReport};

const TAG_FOLDS: u64 = 21;
const TAG_TRAIN_PAIRS: u64 = 22;
const TAG_TEST_PAIRS: u64 = 23;
const TAG_MODEL: u64 = 24;

/// Window sizes of the authentication-time sweep, in seconds.
pub const SWEEP_WINDOWS: [usize; 4] = [3, 5, 10, 20];

pub type WindowKey = (UserId, i64);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyPair {
    pub a: WindowKey,
    pub b: WindowKey,
    pub label: PairLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Window, shift, seed, training caps and optimizer settings.
    pub train: TrainConfig,
    pub folds: usize,
    pub modalities: Vec<Modality>,
    /// Genuine pairs per test user; impostors match them one for one.
    pub eval_max_genuine_per_user: usize,
    pub fusion: bool,
    pub contribution: bool,
    pub exec: Execution,
}

impl PipelineConfig {
    pub fn new(train: TrainConfig) -> Self {
        PipelineConfig {
            train,
            folds: 4,
            modalities: Modality::ALL.to_vec(),
            eval_max_genuine_per_user: 500,
            fusion: false,
            contribution: false,
            exec: Execution::default(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.train.rng_seed
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.modalities.is_empty() {
            return Err(Error::Config("no modalities selected".into()));
        }
        let unique: BTreeSet<_> = self.modalities.iter().collect();
        if unique.len() != self.modalities.len() {
            return Err(Error::Config("duplicate modality".into()));
        }
        if self.eval_max_genuine_per_user == 0 {
            return Err(Error::Config("eval_max_genuine_per_user must be positive".into()));
        }
        Ok(())
    }

    /// Flat echo for run manifests.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = self
            .train
            .to_text()
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        m.insert("folds".into(), self.folds.to_string());
        m.insert(
            "modalities".into(),
            self.modalities.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        m.insert("eval_max_genuine_per_user".into(), self.eval_max_genuine_per_user.to_string());
        m.insert("fusion".into(), self.fusion.to_string());
        m.insert("contribution".into(), self.contribution.to_string());
        m
    }
}

/// Feature segments of a corpus, indexed by modality and window key.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub window: usize,
    pub users: Vec<UserId>,
    pub modalities: Vec<Modality>,
    segments: Vec<BTreeMap<WindowKey, FeatureSegment>>,
    roster: BTreeMap<UserId, Vec<i64>>,
}

impl PreparedCorpus {
    /// Segments every `(user, modality)` stream. A window key enters the
    /// roster only if all `modalities` have a segment starting there.
    pub fn prepare(corpus: &Corpus, modalities: &[Modality], window: usize, shift: usize) -> Result<Self> {
        let users = corpus.users();
        if users.is_empty() {
            return Err(Error::Empty("corpus has no users".into()));
        }
        if modalities.is_empty() {
            return Err(Error::Empty("corpus has no modalities".into()));
        }
        let mut segments = Vec::with_capacity(modalities.len());
        for &m in modalities {
            let mut by_key = BTreeMap::new();
            for u in &users {
                let Some(records) = corpus.stream(u, m) else { continue };
                for seg in segment_records(u, m, records, window, shift)? {
                    let f = assemble_features(&seg, m.is_movement())?;
                    by_key.insert((u.clone(), f.start_time), f);
                }
            }
            segments.push(by_key);
        }
        let mut roster = BTreeMap::new();
        for u in &users {
            let times: Vec<i64> = segments[0]
                .keys()
                .filter(|(user, _)| user == u)
                .filter(|k| segments[1..].iter().all(|s| s.contains_key(*k)))
                .map(|(_, t)| *t)
                .collect();
            roster.insert(u.clone(), times);
        }
        Ok(PreparedCorpus { window, users, modalities: modalities.to_vec(), segments, roster })
    }

    /// Start times of the aligned windows of `user`.
    pub fn roster(&self, user: &UserId) -> &[i64] {
        self.roster.get(user).map_or(&[], Vec::as_slice)
    }

    pub fn roster_len(&self) -> usize {
        self.roster.values().map(Vec::len).sum()
    }

    fn position(&self, modality: Modality) -> Result<usize> {
        self.modalities
            .iter()
            .position(|&m| m == modality)
            .ok_or_else(|| Error::Config(format!("modality {modality} was not prepared")))
    }

    pub fn segment(&self, modality: Modality, key: &WindowKey) -> Option<&FeatureSegment> {
        self.segments[self.position(modality).ok()?].get(key)
    }

    fn raw(&self, pos: usize, key: &WindowKey) -> &FeatureSegment {
        &self.segments[pos][key]
    }
}

/// Splits the users of `prepared` into folds with the pipeline seed.
pub fn folds_for(prepared: &PreparedCorpus, config: &PipelineConfig) -> Result<Vec<FoldSpec>> {
    let folds = split_folds(&prepared.users, config.folds, derive_seed(config.seed(), &[TAG_FOLDS]))?;
    for f in &folds {
        if f.test_users.len() < 2 {
            return Err(Error::Config(format!(
                "fold {} would test {} user(s); impostor pairs need at least 2 (use fewer folds or more users)",
                f.fold_index,
                f.test_users.len()
            )));
        }
    }
    Ok(folds)
}

fn key_pairs(prepared: &PreparedCorpus, users: &[UserId], cap: usize, seed: u64) -> Result<Vec<KeyPair>> {
    let sizes: Vec<usize> = users.iter().map(|u| prepared.roster(u).len()).collect();
    let key = |(g, i): (usize, usize)| (users[g].clone(), prepared.roster(&users[g])[i]);
    Ok(pair_indices(&sizes, cap, seed)?
        .into_iter()
        .map(|p| KeyPair { a: key(p.a), b: key(p.b), label: p.label })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPairs {
    pub fold: FoldSpec,
    pub train: Vec<KeyPair>,
    pub test: Vec<KeyPair>,
    /// Fingerprint of the test roster, carried by every score set.
    pub roster_id: u64,
}

/// Training pairs from the fold's training users and test pairs from its
/// test users only.
pub fn fold_pairs(prepared: &PreparedCorpus, fold: &FoldSpec, config: &PipelineConfig) -> Result<FoldPairs> {
    let f = fold.fold_index as u64;
    let seed = config.seed();
    let train = key_pairs(
        prepared,
        &fold.train_users,
        config.train.max_genuine_per_user,
        derive_seed(seed, &[TAG_TRAIN_PAIRS, f]),
    )
    .map_err(|e| insufficient(e, fold, "training"))?;
    let test = key_pairs(
        prepared,
        &fold.test_users,
        config.eval_max_genuine_per_user,
        derive_seed(seed, &[TAG_TEST_PAIRS, f]),
    )
    .map_err(|e| insufficient(e, fold, "test"))?;
    let mut h = Sha256::new();
    for p in &test {
        h.update(format!("{}:{}|{}:{}|{:?};", p.a.0, p.a.1, p.b.0, p.b.1, p.label).as_bytes());
    }
    let digest = h.finalize();
    let roster_id = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    Ok(FoldPairs { fold: fold.clone(), train, test, roster_id })
}

fn insufficient(e: Error, fold: &FoldSpec, side: &str) -> Error {
    match e {
        Error::Contract(msg) | Error::Empty(msg) => {
            Error::Empty(format!("fold {} {side} users: {msg}", fold.fold_index))
        }
        other => other,
    }
}

/// Per-cell z-scoring of `T x D'` feature matrices, fitted on training
/// users only.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mean: Array2<f64>,
    pub scale: Array2<f64>,
}

impl FeatureScaler {
    pub fn fit<'a>(segments: impl IntoIterator<Item = &'a FeatureSegment>) -> Result<Self> {
        let mut iter = segments.into_iter();
        let first = iter.next().ok_or_else(|| Error::Empty("no segments to fit the scaler".into()))?;
        let mut sum = first.features.clone();
        let mut sq = first.features.mapv(|v| v * v);
        let mut n = 1.0;
        for s in iter {
            if s.features.dim() != sum.dim() {
                return Err(Error::Shape {
                    context: "scaler fit",
                    expected: sum.len(),
                    actual: s.features.len(),
                });
            }
            sum += &s.features;
            sq += &s.features.mapv(|v| v * v);
            n += 1.0;
        }
        let mean = sum / n;
        let var = sq / n - mean.mapv(|m| m * m);
        let scale = var.mapv(|v| if v > 1e-12 { v.sqrt() } else { 1.0 });
        Ok(FeatureScaler { mean, scale })
    }

    pub fn apply(&self, segment: &FeatureSegment) -> FeatureSegment {
        FeatureSegment {
            features: (&segment.features - &self.mean) / &self.scale,
            ..segment.clone()
        }
    }
}

/// Fits the scaler of `modality` on every aligned window of the fold's
/// training users.
pub fn fit_scaler(prepared: &PreparedCorpus, fold: &FoldSpec, modality: Modality) -> Result<FeatureScaler> {
    let pos = prepared.position(modality)?;
    let keys = fold
        .train_users
        .iter()
        .flat_map(|u| prepared.roster(u).iter().map(move |&t| (u.clone(), t)));
    let segs: Vec<&FeatureSegment> = keys.map(|k| prepared.raw(pos, &k)).collect();
    FeatureScaler::fit(segs)
}

fn materialize(pairs: &[KeyPair], lookup: impl Fn(&WindowKey) -> FeatureSegment) -> Vec<SegmentPair> {
    pairs
        .iter()
        .map(|p| SegmentPair { a: lookup(&p.a), b: lookup(&p.b), label: p.label })
        .collect()
}

/// Standardized training pairs for one modality of one fold: exactly what
/// the pipeline trains on.
pub fn training_pairs(prepared: &PreparedCorpus, pairs: &FoldPairs, modality: Modality) -> Result<Vec<SegmentPair>> {
    let pos = prepared.position(modality)?;
    let scaler = fit_scaler(prepared, &pairs.fold, modality)?;
    Ok(materialize(&pairs.train, |k| scaler.apply(prepared.raw(pos, k))))
}

/// Training configuration of one `(fold, modality)` model: the shared
/// config with a derived seed.
pub fn fold_train_config(config: &TrainConfig, fold: usize, modality: Modality) -> TrainConfig {
    let mut c = config.clone();
    c.rng_seed = derive_seed(config.rng_seed, &[TAG_MODEL, fold as u64, modality.index() as u64]);
    c
}

/// `dir/fold{fold}/{modality}.ckpt`
pub fn checkpoint_path(dir: &Path, fold: usize, modality: Modality) -> PathBuf {
    dir.join(format!("fold{fold}")).join(format!("{}.ckpt", modality.name()))
}

/// Supplies the model evaluated for one modality in one fold.
pub trait ModelProvider {
    fn provide(&mut self, fold: usize, modality: Modality, train_pairs: &[SegmentPair]) -> Result<SiameseModel>;
}

/// Trains each model from the fold's training pairs, optionally saving
/// checkpoints under [`checkpoint_path`].
#[derive(Debug, Clone)]
pub struct TrainModels {
    pub config: TrainConfig,
    pub exec: Execution,
    pub checkpoint_dir: Option<PathBuf>,
    pub reports: Vec<(usize, Modality, TrainReport)>,
}

impl TrainModels {
    pub fn new(config: TrainConfig, exec: Execution) -> Self {
        TrainModels { config, exec, checkpoint_dir: None, reports: Vec::new() }
    }

    pub fn saving_to(mut self, dir: impl Into<PathBuf>) -> Self {
        self.checkpoint_dir = Some(dir.into());
        self
    }
}

impl ModelProvider for TrainModels {
    fn provide(&mut self, fold: usize, modality: Modality, train_pairs: &[SegmentPair]) -> Result<SiameseModel> {
        let config = fold_train_config(&self.config, fold, modality);
        log::info!("fold {fold}: training {modality} on {} pairs", train_pairs.len());
        let (model, mut report) = train_modality_with(train_pairs, &config, self.exec)?;
        if let Some(dir) = &self.checkpoint_dir {
            let path = checkpoint_path(dir, fold, modality);
            save_checkpoint(&model, &path)?;
            report.checkpoint = Some(path);
        }
        self.reports.push((fold, modality, report));
        Ok(model)
    }
}

/// Loads previously trained checkpoints from [`checkpoint_path`].
#[derive(Debug, Clone)]
pub struct LoadModels {
    pub dir: PathBuf,
}

impl ModelProvider for LoadModels {
    fn provide(&mut self, fold: usize, modality: Modality, train_pairs: &[SegmentPair]) -> Result<SiameseModel> {
        let path = checkpoint_path(&self.dir, fold, modality);
        if !path.is_file() {
            return Err(Error::Checkpoint(format!(
                "missing checkpoint for modality {modality} in fold {fold} (expected {})",
                path.display()
            )));
        }
        let model = load_checkpoint(&path)?;
        let width = train_pairs.first().map_or(modality.feature_width(), |p| p.a.width());
        if model.input_width() != width {
            return Err(Error::Checkpoint(format!(
                "checkpoint for modality {modality} in fold {fold} expects input width {}, data has {width}",
                model.input_width()
            )));
        }
        Ok(model)
    }
}

/// Users seen by each fold, for the leakage audit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FoldAudit {
    pub fold: usize,
    pub train_users: BTreeSet<UserId>,
    /// Users appearing in any pair a model was trained on.
    pub trained_on: BTreeSet<UserId>,
    /// Users appearing in any scored evaluation pair.
    pub evaluated: BTreeSet<UserId>,
}

impl FoldAudit {
    /// Evaluated users that are also training users; empty when clean.
    pub fn leaks(&self) -> Vec<UserId> {
        self.evaluated
            .iter()
            .filter(|u| self.train_users.contains(*u) || self.trained_on.contains(*u))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub report: EvaluationReport,
    pub audits: Vec<FoldAudit>,
    /// TAR@0.1%FAR of all modalities fused, when there are at least two.
    pub fused_all: Option<MetricStats>,
}

fn score_keys(
    model: &SiameseModel,
    pairs: &[KeyPair],
    lookup: &BTreeMap<WindowKey, FeatureSegment>,
    label: &str,
    exec: Execution,
) -> Result<ScoreSet> {
    let keys: Vec<&WindowKey> = pairs.iter().flat_map(|p| [&p.a, &p.b]).collect::<BTreeSet<_>>().into_iter().collect();
    let embedded: Vec<Result<Embedding>> = exec.map(&keys, |k| embed(model, &lookup[*k]));
    let mut cache = BTreeMap::new();
    for (k, e) in keys.into_iter().zip(embedded) {
        cache.insert(k, e?);
    }
    let mut out = ScoreSet::new(label, Vec::new(), Vec::new());
    for p in pairs {
        let (a, b) = (&cache[&p.a], &cache[&p.b]);
        let d = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let s = crate::evaluation::distance_to_score(d);
        if p.label.is_genuine() {
            out.genuine.push(s);
        } else {
            out.impostor.push(s);
        }
    }
    Ok(out)
}

/// Segments `corpus` with the roster taken over every modality it holds,
/// so evaluating any subset of modalities (or training one) sees the same
/// pairs.
pub fn prepare_corpus(corpus: &Corpus, config: &TrainConfig) -> Result<PreparedCorpus> {
    PreparedCorpus::prepare(corpus, &corpus.modalities(), config.window, config.shift)
}

/// Runs every fold for every configured modality.
pub fn run_pipeline(corpus: &Corpus, config: &PipelineConfig, provider: &mut dyn ModelProvider) -> Result<PipelineRun> {
    config.validate()?;
    let prepared = prepare_corpus(corpus, &config.train)?;
    run_prepared(&prepared, config, provider)
}

pub fn run_prepared(prepared: &PreparedCorpus, config: &PipelineConfig, provider: &mut dyn ModelProvider) -> Result<PipelineRun> {
    config.validate()?;
    if prepared.window != config.train.window {
        return Err(Error::Config(format!(
            "corpus prepared at T={} but config has window {}",
            prepared.window, config.train.window
        )));
    }
    let folds = folds_for(prepared, config)?;
    let labels: Vec<String> = config.modalities.iter().map(|m| m.short().to_string()).collect();
    let mut results: Vec<ModalityResult> = labels
        .iter()
        .map(|l| ModalityResult { label: l.clone(), per_fold: Vec::new(), baseline_per_fold: Vec::new() })
        .collect();
    let mut fold_tests: Vec<Vec<ScoreSet>> = Vec::new();
    let mut fold_refs: Vec<Vec<ScoreSet>> = Vec::new();
    let mut audits = Vec::new();

    for fold in &folds {
        let pairs = fold_pairs(prepared, fold, config)?;
        let mut audit = FoldAudit {
            fold: fold.fold_index,
            train_users: fold.train_users.iter().cloned().collect(),
            ..Default::default()
        };
        for p in &pairs.train {
            audit.trained_on.insert(p.a.0.clone());
            audit.trained_on.insert(p.b.0.clone());
        }
        for p in &pairs.test {
            audit.evaluated.insert(p.a.0.clone());
            audit.evaluated.insert(p.b.0.clone());
        }
        let used: BTreeSet<&WindowKey> = pairs.train.iter().chain(&pairs.test).flat_map(|p| [&p.a, &p.b]).collect();

        let mut tests = Vec::new();
        let mut refs = Vec::new();
        for (mi, &m) in config.modalities.iter().enumerate() {
            let pos = prepared.position(m)?;
            let scaler = fit_scaler(prepared, fold, m)?;
            let standardized: BTreeMap<WindowKey, FeatureSegment> =
                used.iter().map(|&k| (k.clone(), scaler.apply(prepared.raw(pos, k)))).collect();
            let train_sp = materialize(&pairs.train, |k| standardized[k].clone());
            let model = provider.provide(fold.fold_index, m, &train_sp)?;
            drop(train_sp);

            let test = score_keys(&model, &pairs.test, &standardized, &labels[mi], config.exec)?.with_roster(pairs.roster_id);
            let reference = score_keys(&model, &pairs.train, &standardized, &labels[mi], config.exec)?;
            let roc = roc_summary(&test)?;
            log::info!(
                "fold {}: {} TAR@1% {:.2} TAR@0.1% {:.2} EER {:.2}",
                fold.fold_index,
                labels[mi],
                roc.tar_at_far_1pct,
                roc.tar_at_far_0p1pct,
                roc.eer
            );
            results[mi].per_fold.push(roc);

            let raw = |k: &WindowKey| prepared.raw(pos, k).clone();
            let baseline = euclidean_baseline(&materialize(&pairs.train, raw), &materialize(&pairs.test, raw))?;
            results[mi].baseline_per_fold.push(baseline);
            tests.push(test);
            refs.push(reference);
        }
        fold_tests.push(tests);
        fold_refs.push(refs);
        audits.push(audit);
    }

    // normalize per fold, dropping a modality from every fold if any fold
    // finds its reference range degenerate
    let mut excluded = BTreeSet::new();
    let mut normalized = Vec::new();
    for (tests, refs) in fold_tests.iter().zip(&fold_refs) {
        let n = normalize_scores(tests, refs)?;
        excluded.extend(n.excluded.iter().cloned());
        normalized.push(n.sets);
    }
    for fold in &mut normalized {
        fold.retain(|s| !excluded.contains(&s.label));
    }
    let fusable = normalized.first().map_or(0, Vec::len);

    let fused_all = if fusable >= 2 {
        let per_fold = normalized
            .iter()
            .map(|sets| roc_summary(&fuse_sum(&sets.iter().collect::<Vec<_>>())?))
            .collect::<Result<Vec<RocSummary>>>()?;
        Some(aggregate(&per_fold)[1])
    } else {
        None
    };

    let mut report = EvaluationReport {
        window: prepared.window,
        folds: folds.len(),
        modalities: results,
        excluded: excluded.into_iter().collect(),
        ..Default::default()
    };
    if (config.fusion || config.contribution) && fusable >= 1 {
        let fusion = enumerate_subsets(&normalized, config.exec)?;
        if config.contribution && fusable >= 2 {
            let all: Vec<usize> = (0..fusable).collect();
            let tar_all = fusion.find(&all).expect("full subset").stats[1].mean;
            for (i, label) in fusion.labels.iter().enumerate() {
                let without: Vec<usize> = all.iter().copied().filter(|&j| j != i).collect();
                let tar_without = fusion.find(&without).expect("leave-one-out subset").stats[1].mean;
                report.contributions.push(ContributionRow {
                    label: label.clone(),
                    tar_all,
                    tar_without,
                    value: contribution(tar_all.clamp(0.0, 100.0), tar_without.clamp(0.0, 100.0))?,
                });
            }
        }
        if config.fusion {
            report.fusion = Some(fusion);
        }
    }
    Ok(PipelineRun { report, audits, fused_all })
}

/// Re-segments, retrains and re-scores the corpus at each window size.
/// A window too long for the data (no pairs possible in some fold) is
/// reported as skipped.
pub fn temporal_sweep(corpus: &Corpus, config: &PipelineConfig, windows: &[usize]) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    for &window in windows {
        let mut c = config.clone();
        c.train.window = window;
        c.fusion = false;
        c.contribution = false;
        let mut provider = TrainModels::new(c.train.clone(), c.exec);
        let outcome = match run_pipeline(corpus, &c, &mut provider) {
            Ok(run) => SweepOutcome::Done {
                per_modality: run.report.modalities.iter().map(|m| (m.label.clone(), m.stats()[1])).collect(),
                fused: run.fused_all,
            },
            Err(Error::Empty(reason)) => {
                log::warn!("T={window} skipped: {reason}");
                SweepOutcome::Skipped(reason)
            }
            Err(e) => return Err(e),
        };
        out.push(SweepEntry { window, outcome });
    }
    Ok(out)
}
