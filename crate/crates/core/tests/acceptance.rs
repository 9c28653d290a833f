//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use passauth::dataset::{corpus_digest, generate_synthetic, Corpus, Modality, PairLabel, SegmentPair, SynthConfig, UserId};
use passauth::evaluation::{contribution, eer, enumerate_subsets, tar_at_far, RunManifest, ScoreSet, SweepOutcome};
use passauth::nn::gradcheck::{finite_difference_gradient, max_relative_error};
use passauth::nn::{batch_gradient, contrastive_loss, init_params};
use passauth::pipeline::{fold_pairs, folds_for, run_pipeline, temporal_sweep, PipelineConfig, PipelineRun, PreparedCorpus, TrainModels};
use passauth::signal::{dft_magnitude, FeatureSegment};
use passauth::training::TrainConfig;
use passauth::Execution;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn seg(rng: &mut ChaCha8Rng, user: &str, t: usize, w: usize) -> FeatureSegment {
    FeatureSegment {
        user_id: UserId::new(user),
        modality: Modality::Gps,
        start_index: 0,
        start_time: 0,
        features: Array2::from_shape_fn((t, w), |_| rng.random_range(-2.0..2.0)),
    }
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let models = 25;
    for trial in 0..models {
        let mut model = init_params(1000 + trial, 2, 3, 1.0).unwrap();
        let gain = rng.random_range(0.5..3.0);
        for v in model.layer1.values_mut().chain(model.layer2.values_mut()) {
            *v *= gain;
        }
        let pairs: Vec<SegmentPair> = (0..4)
            .map(|k| SegmentPair {
                a: seg(&mut rng, "a", 4, 2),
                b: seg(&mut rng, if k % 2 == 0 { "a" } else { "b" }, 4, 2),
                label: if k % 2 == 0 { PairLabel::Genuine } else { PairLabel::Impostor },
            })
            .collect();
        let (_, analytic) = batch_gradient(&model, &pairs, Execution::Sequential).unwrap();
        let numeric = finite_difference_gradient(&model, &pairs, 1e-5).unwrap();
        worst = worst.max(max_relative_error(&analytic, &numeric, 1e-6));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 30.0,
        format!("{models} models C=3 T=4 D'=2, max relative error {worst:.2e} (< 1e-4), {secs:.2}s (< 30s)"),
    )
}

fn naive_dft(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let a = TAU * (k * t) as f64 / n as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            re.hypot(im)
        })
        .collect()
}

fn dft_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_abs, mut worst_parseval): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    for &t in &[3usize, 5, 8, 10, 16, 20] {
        for _ in 0..100 {
            let x: Vec<f64> = (0..t).map(|_| rng.random_range(-10.0..10.0)).collect();
            let got = dft_magnitude(&x).unwrap();
            let want = naive_dft(&x);
            for (g, w) in got.iter().zip(&want) {
                worst_abs = worst_abs.max((g - w).abs());
            }
            let energy: f64 = x.iter().map(|v| v * v).sum();
            let spectral: f64 = got.iter().map(|m| m * m).sum::<f64>() / t as f64;
            worst_parseval = worst_parseval.max((energy - spectral).abs() / energy);
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_abs <= 1e-9 && worst_parseval <= 1e-6 && secs < 5.0,
        format!("{count} signals, max |error| {worst_abs:.2e} (<= 1e-9), Parseval rel {worst_parseval:.2e} (<= 1e-6), {secs:.2}s"),
    )
}

fn oracle_tar(s: &ScoreSet, target: f64) -> (f64, f64) {
    let mut candidates: Vec<f64> = s.genuine.iter().chain(&s.impostor).copied().collect();
    candidates.sort_by(f64::total_cmp);
    let n = s.impostor.len() as f64;
    for tau in candidates {
        let far = s.impostor.iter().filter(|&&v| v > tau).count() as f64 / n;
        if far <= target {
            let tar = 100.0 * s.genuine.iter().filter(|&&v| v > tau).count() as f64 / s.genuine.len() as f64;
            return (tau, tar);
        }
    }
    unreachable!("the largest score always satisfies any target")
}

fn oracle_eer(s: &ScoreSet) -> f64 {
    let mut taus: Vec<f64> = s.genuine.iter().chain(&s.impostor).copied().collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let (ng, ni) = (s.genuine.len() as f64, s.impostor.len() as f64);
    let rates = |tau: f64| {
        let far = s.impostor.iter().filter(|&&v| v > tau).count() as f64 / ni;
        let frr = s.genuine.iter().filter(|&&v| v <= tau).count() as f64 / ng;
        (far, frr)
    };
    let mut prev = (1.0, 0.0);
    for tau in taus {
        let (far, frr) = rates(tau);
        if frr >= far {
            let (d0, d1) = (prev.0 - prev.1, far - frr);
            if d1 == 0.0 {
                return 100.0 * far;
            }
            return 100.0 * (prev.0 + d0 / (d0 - d1) * (far - prev.0));
        }
        prev = (far, frr);
    }
    unreachable!()
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut mismatches, mut worst_eer): (usize, f64) = (0, 0.0);
    for i in 0..200 {
        let ng = rng.random_range(1..=100);
        let ni = rng.random_range(1..=100);
        // coarse grid in half of the sets to force ties
        let coarse = i % 2 == 0;
        let mut draw = |shift: f64| {
            let v: f64 = rng.random_range(0.0..1.0) + shift;
            if coarse {
                (v * 10.0).round() / 10.0
            } else {
                v
            }
        };
        let genuine: Vec<f64> = (0..ng).map(|_| draw(0.3)).collect();
        let impostor: Vec<f64> = (0..ni).map(|_| draw(0.0)).collect();
        let s = ScoreSet::new("r", genuine, impostor);
        for target in [0.01, 0.001, 0.1, 0.37] {
            let got = tar_at_far(&s, target).unwrap();
            let want = oracle_tar(&s, target);
            if got.threshold != want.0 || got.tar != want.1 {
                mismatches += 1;
            }
        }
        worst_eer = worst_eer.max((eer(&s).unwrap() - oracle_eer(&s)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && worst_eer <= 1e-9 && secs < 10.0,
        format!("200 sets, {mismatches} TAR mismatches, max EER difference {worst_eer:.2e} (<= 1e-9), {secs:.2}s"),
    )
}

fn loss_identities() -> Outcome {
    let a = contrastive_loss(0.0, 0.0, 1.0).unwrap();
    let beyond = [1.0, 1.5, 7.0].iter().map(|&d| contrastive_loss(d, 1.0, 1.0).unwrap()).fold(0.0, f64::max);
    let mid = contrastive_loss(0.4, 1.0, 1.0).unwrap();
    let left = contrastive_loss(1.0 - 1e-13, 1.0, 1.0).unwrap();
    let right = contrastive_loss(1.0 + 1e-13, 1.0, 1.0).unwrap();
    let gap = (left - right).abs();
    outcome(
        a == 0.0 && beyond == 0.0 && mid == 0.18 && gap < 1e-12,
        format!("L(y=0,d=0)={a}, max L(y=1,d>=1)={beyond}, L(y=1,d=0.4)={mid}, |left-right| at margin {gap:.1e}"),
    )
}

fn end_to_end_config() -> PipelineConfig {
    let mut c = PipelineConfig::new(TrainConfig::default());
    c.fusion = true;
    c.contribution = true;
    c
}

struct EndToEnd {
    run: PipelineRun,
    sweep_t3: SweepOutcome,
    secs: f64,
}

fn end_to_end(corpus: &Corpus) -> EndToEnd {
    let start = Instant::now();
    let config = end_to_end_config();
    let mut provider = TrainModels::new(config.train.clone(), config.exec);
    let run = run_pipeline(corpus, &config, &mut provider).expect("pipeline at T=20");
    let sweep = temporal_sweep(corpus, &config, &[3]).expect("sweep at T=3");
    EndToEnd { run, sweep_t3: sweep.into_iter().next().unwrap().outcome, secs: start.elapsed().as_secs_f64() }
}

fn criterion_5(e: &EndToEnd) -> Outcome {
    let r = &e.run.report;
    let mut detail = Vec::new();
    let mut margins_ok = true;
    for m in &r.modalities {
        let (model, base) = (m.stats()[0].mean, m.baseline_stats()[0].mean);
        margins_ok &= model - base >= 20.0;
        detail.push(format!("{} {:.2}/{:.2}", m.label, model, base));
    }
    let best_single = r.modalities.iter().map(|m| m.stats()[1].mean).fold(f64::NEG_INFINITY, f64::max);
    let fused = e.run.fused_all.map(|s| s.mean).unwrap_or(f64::NAN);
    let fusion_ok = fused >= best_single;
    let t20_mean = r.modalities.iter().map(|m| m.stats()[1].mean).sum::<f64>() / r.modalities.len() as f64;
    let (t3_fused, t3_mean) = match &e.sweep_t3 {
        SweepOutcome::Done { per_modality, fused } => (
            fused.map(|s| s.mean).unwrap_or(f64::NAN),
            per_modality.iter().map(|(_, s)| s.mean).sum::<f64>() / per_modality.len() as f64,
        ),
        SweepOutcome::Skipped(_) => (f64::NAN, f64::NAN),
    };
    let window_ok = fused >= t3_fused && t20_mean >= t3_mean;
    let time_ok = e.secs < 900.0;
    outcome(
        margins_ok && fusion_ok && window_ok && time_ok,
        format!(
            "(a) TAR@1% model/baseline {} [margin >= 20: {}]; (b) fused-all TAR@0.1% {:.2} vs best single {:.2} [{}]; \
             (c) TAR@0.1% T=20 vs T=3: fused {:.2}/{:.2}, modality mean {:.2}/{:.2} [{}]; {:.0}s (< 900s)",
            detail.join(", "),
            margins_ok,
            fused,
            best_single,
            fusion_ok,
            fused,
            t3_fused,
            t20_mean,
            t3_mean,
            window_ok,
            e.secs
        ),
    )
}

fn subset_count(e: &EndToEnd) -> Outcome {
    let fusion = e.run.report.fusion.as_ref().expect("fusion enabled");
    let from_run = fusion.multi().count();
    let expected: usize = (2..=8).map(|k| binomial(8, k)).sum();
    let manifest = RunManifest::new("acceptance", BTreeMap::new(), String::new(), 0);
    let table = e.run.report.to_table(&manifest);
    let table_rows = table
        .split("\n== ")
        .find(|s| s.starts_with("fusion:"))
        .map_or(0, |s| s.lines().count().saturating_sub(2));
    let sets: Vec<Vec<ScoreSet>> = vec![(0..8).map(|m| ScoreSet::new(format!("m{m}"), vec![1.0, 0.5], vec![0.2, 0.6])).collect()];
    let standalone = enumerate_subsets(&sets, Execution::Sequential).unwrap().multi().count();
    outcome(
        from_run == 247 && expected == 247 && table_rows == 247 && standalone == 247,
        format!("sum C(8,k) k=2..8 = {expected}; evaluated {from_run} in the run, {standalone} standalone; {table_rows} table rows"),
    )
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn contribution_value() -> Outcome {
    let c = contribution(99.98, 99.71).unwrap().unwrap();
    let independent = (99.98 - 99.71) / (100.0 - 99.71);
    let recomputed = 0.27 / 0.29;
    outcome(
        (c - 0.9310).abs() <= 1e-4 && (c - independent).abs() < 1e-12 && (c - recomputed).abs() < 1e-9,
        format!("contribution(99.98, 99.71) = {c:.6} (0.27/0.29 = {recomputed:.6})"),
    )
}

fn hash_tree(dir: &Path) -> String {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(dir).unwrap().to_string_lossy().as_bytes());
        h.update(fs::read(&f).unwrap());
    }
    hex::encode(h.finalize())
}

fn determinism_config(exec: Execution) -> PipelineConfig {
    let mut train = TrainConfig::default();
    train.epochs = 2;
    train.max_genuine_per_user = 30;
    train.rng_seed = 17;
    let mut c = PipelineConfig::new(train);
    c.eval_max_genuine_per_user = 60;
    c.fusion = true;
    c.contribution = true;
    c.exec = exec;
    c
}

fn pipeline_artifacts(corpus: &Corpus, exec: Execution, dir: &Path) -> (String, Vec<passauth::pipeline::FoldAudit>) {
    let config = determinism_config(exec);
    let mut provider = TrainModels::new(config.train.clone(), exec).saving_to(dir.join("checkpoints"));
    let run = run_pipeline(corpus, &config, &mut provider).unwrap();
    let manifest = RunManifest::new("evaluate", config.echo(), corpus_digest(corpus), config.seed());
    fs::write(dir.join("report.jsonl"), run.report.to_jsonl(&manifest)).unwrap();
    fs::write(dir.join("report.txt"), run.report.to_table(&manifest)).unwrap();
    (hash_tree(dir), run.audits)
}

fn determinism(corpus: &Corpus, audits: &mut Vec<passauth::pipeline::FoldAudit>) -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ha, audits_a) = pipeline_artifacts(corpus, Execution::Parallel, a.path());
    let (hb, audits_b) = pipeline_artifacts(corpus, Execution::Sequential, b.path());
    let checkpoints = fs::read_dir(a.path().join("checkpoints")).unwrap().count();
    audits.extend(audits_a);
    audits.extend(audits_b);
    outcome(
        ha == hb,
        format!("{checkpoints} fold checkpoint dirs + reports, parallel run {} vs sequential run {}", &ha[..16], &hb[..16]),
    )
}

fn leakage(corpus: &Corpus, audits: &[passauth::pipeline::FoldAudit]) -> Outcome {
    let mut leaks = audits.iter().map(|a| a.leaks().len()).sum::<usize>();
    let mut pairs_checked = 0;
    let mut folds_checked = audits.len();
    let prepared = PreparedCorpus::prepare(corpus, &[Modality::Keystroke, Modality::Gps], 20, 1).unwrap();
    for seed in 0..5u64 {
        for k in [2, 3, 4] {
            let mut c = PipelineConfig::new(TrainConfig { rng_seed: seed, ..TrainConfig::default() });
            c.folds = k;
            for fold in folds_for(&prepared, &c).unwrap() {
                let p = fold_pairs(&prepared, &fold, &c).unwrap();
                for pair in &p.test {
                    pairs_checked += 1;
                    if fold.is_train(&pair.a.0) || fold.is_train(&pair.b.0) {
                        leaks += 1;
                    }
                }
                for pair in &p.train {
                    if fold.is_test(&pair.a.0) || fold.is_test(&pair.b.0) {
                        leaks += 1;
                    }
                }
                folds_checked += 1;
            }
        }
    }
    outcome(leaks == 0, format!("{folds_checked} folds over pipeline runs and seeds 0..5 x k in {{2,3,4}}, {pairs_checked} test pairs, {leaks} leaks"))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "gradient correctness", gradient_check()),
        (2, "DFT oracle", dft_oracle()),
        (3, "metric oracles", metric_oracles()),
        (4, "contrastive-loss identities", loss_identities()),
    ];
    let corpus = generate_synthetic(&SynthConfig::default()).expect("synthetic corpus");
    let e2e = end_to_end(&corpus);
    results.push((5, "end-to-end synthetic reproduction", criterion_5(&e2e)));
    results.push((6, "subset count", subset_count(&e2e)));
    results.push((7, "contribution formula", contribution_value()));
    let mut audits = e2e.run.audits.clone();
    results.push((8, "determinism", determinism(&corpus, &mut audits)));
    results.push((9, "no-leakage audit", leakage(&corpus, &audits)));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} criterion {n}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
