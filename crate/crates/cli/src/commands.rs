use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::json;

use passauth::dataset::{corpus_hash, generate_synthetic, load_corpus, save_corpus, Corpus, Modality, SynthConfig};
use passauth::evaluation::{write_atomic, RunManifest};
use passauth::pipeline::{
    checkpoint_path, fold_pairs, fold_train_config, folds_for, prepare_corpus, run_pipeline, temporal_sweep,
    training_pairs, LoadModels, PipelineConfig, SWEEP_WINDOWS,
};
use passauth::training::{save_checkpoint, train_modality_with, TrainConfig};
use passauth::{Error, Execution};

use crate::{EvaluateArgs, GenerateArgs, TrainArgs};

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                _ if err.is_numerical() => 3,
                Error::Config(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes the manifest with its id and wall-clock bounds. Timestamps live
/// only here, so the reports themselves stay byte-reproducible.
fn write_run_manifest(path: &Path, manifest: &RunManifest, started: u64) -> Result<()> {
    let mut value = serde_json::to_value(manifest)?;
    value["manifest_id"] = json!(manifest.id());
    value["started_unix"] = json!(started);
    value["finished_unix"] = json!(unix_now());
    write_atomic(path, &(serde_json::to_string_pretty(&value)? + "\n"))?;
    Ok(())
}

fn load_train_config(path: Option<&Path>, seed: Option<u64>, window: Option<usize>) -> Result<TrainConfig> {
    let mut config = match path {
        Some(p) => TrainConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        config.rng_seed = s;
    }
    if let Some(w) = window {
        config.window = w;
    }
    config.validate()?;
    Ok(config)
}

fn read_corpus(dir: &Path) -> Result<Corpus> {
    let corpus = load_corpus(dir).with_context(|| format!("loading corpus from {}", dir.display()))?;
    if corpus.is_empty() {
        return Err(Error::Empty(format!("no record files in {}", dir.display())).into());
    }
    Ok(corpus)
}

fn require_present(corpus: &Corpus, modality: Modality) -> Result<()> {
    if !corpus.modalities().contains(&modality) {
        return Err(Error::Empty(format!("corpus has no {modality} streams")).into());
    }
    Ok(())
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let started = unix_now();
    let config = SynthConfig { n_users: a.n_users, days: a.days, seed: a.seed, ..SynthConfig::default() };
    let corpus = generate_synthetic(&config)?;
    let hash = save_corpus(&corpus, &a.out_dir, config.echo())?;
    let manifest = RunManifest::new("generate", config.echo(), hash.clone(), a.seed);
    write_run_manifest(&a.out_dir.join("run-manifest.json"), &manifest, started)?;
    println!("wrote {} streams ({} records) to {}", corpus.streams.len(), corpus.record_count(), a.out_dir.display());
    println!("corpus_hash = {hash}");
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let started = unix_now();
    let requested: Option<Modality> = match a.modality.as_str() {
        "all" => None,
        name => Some(name.parse()?),
    };
    let config = load_train_config(a.config.as_deref(), a.seed, a.window)?;
    let single = requested.is_some() && a.fold.is_some();
    match (&a.out_checkpoint, &a.checkpoints_dir) {
        (Some(_), _) if !single => {
            return Err(Error::Config(
                "--out-checkpoint needs a single --modality and --fold; use --checkpoints-dir otherwise".into(),
            )
            .into())
        }
        (None, None) => return Err(Error::Config("give --out-checkpoint or --checkpoints-dir".into()).into()),
        _ => {}
    }

    let corpus = read_corpus(&a.corpus_dir)?;
    let modalities = match requested {
        Some(m) => {
            require_present(&corpus, m)?;
            vec![m]
        }
        None => corpus.modalities(),
    };
    let mut pipeline = PipelineConfig::new(config.clone());
    pipeline.folds = a.folds;
    pipeline.modalities = modalities.clone();
    pipeline.validate()?;
    let prepared = prepare_corpus(&corpus, &config)?;
    let folds = folds_for(&prepared, &pipeline)?;
    let selected: Vec<usize> = match a.fold {
        Some(f) if f >= folds.len() => {
            return Err(Error::Config(format!("--fold {f} out of range for {} folds", folds.len())).into())
        }
        Some(f) => vec![f],
        None => (0..folds.len()).collect(),
    };

    let mut outputs = Vec::new();
    for &f in &selected {
        let pairs = fold_pairs(&prepared, &folds[f], &pipeline)?;
        for &m in &modalities {
            let train_pairs = training_pairs(&prepared, &pairs, m)?;
            let fold_config = fold_train_config(&config, f, m);
            log::info!("fold {f}: training {m} on {} pairs", train_pairs.len());
            let (model, mut report) = train_modality_with(&train_pairs, &fold_config, Execution::default())
                .with_context(|| format!("training {m} in fold {f}"))?;
            let path: PathBuf = match (&a.out_checkpoint, &a.checkpoints_dir) {
                (Some(p), _) => p.clone(),
                (None, Some(dir)) => checkpoint_path(dir, f, m),
                (None, None) => unreachable!("checked above"),
            };
            save_checkpoint(&model, &path)?;
            report.checkpoint = Some(path.clone());
            let report_path = path.with_extension("report.txt");
            write_atomic(&report_path, &report.to_text())?;
            println!("fold {f} {m}: final_loss = {:?} -> {}", report.final_loss(), path.display());
            outputs.push(path);
        }
    }
    let mut echo = pipeline.echo();
    echo.insert("trained_folds".into(), selected.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
    let manifest = RunManifest::new("train", echo, corpus_hash(&a.corpus_dir)?, config.rng_seed);
    let manifest_path = match (&a.out_checkpoint, &a.checkpoints_dir) {
        (Some(p), _) => p.with_extension("manifest.json"),
        (None, Some(dir)) => dir.join("train-manifest.json"),
        (None, None) => unreachable!("checked above"),
    };
    write_run_manifest(&manifest_path, &manifest, started)?;
    log::info!("wrote {} checkpoints", outputs.len());
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let started = unix_now();
    let requested = a.modality.iter().map(|m| m.parse::<Modality>()).collect::<Result<Vec<_>, _>>()?;
    let config = load_train_config(a.config.as_deref(), a.seed, a.window)?;
    let corpus = read_corpus(&a.corpus_dir)?;
    let modalities = if requested.is_empty() {
        corpus.modalities()
    } else {
        for &m in &requested {
            require_present(&corpus, m)?;
        }
        let mut m = requested;
        m.sort();
        m.dedup();
        m
    };
    let mut pipeline = PipelineConfig::new(config);
    pipeline.folds = a.folds;
    pipeline.modalities = modalities;
    pipeline.eval_max_genuine_per_user = a.eval_pairs;
    pipeline.fusion = a.fusion;
    pipeline.contribution = a.contribution;

    let mut provider = LoadModels { dir: a.checkpoints_dir.clone() };
    let mut report = run_pipeline(&corpus, &pipeline, &mut provider)?.report;
    if a.sweep {
        report.sweep = temporal_sweep(&corpus, &pipeline, &SWEEP_WINDOWS)?;
    }

    let mut echo = pipeline.echo();
    echo.insert("sweep".into(), a.sweep.to_string());
    let manifest = RunManifest::new("evaluate", echo, corpus_hash(&a.corpus_dir)?, pipeline.seed());
    let table_path = a.out_table.clone().unwrap_or_else(|| a.out_report.with_extension("txt"));
    let table = report.to_table(&manifest);
    write_atomic(&a.out_report, &report.to_jsonl(&manifest))?;
    write_atomic(&table_path, &table)?;
    write_run_manifest(&a.out_report.with_extension("manifest.json"), &manifest, started)?;
    print!("{table}");
    Ok(())
}
