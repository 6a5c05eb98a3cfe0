//! End-to-end run: ingest, split, pair, train, predict, score against the
//! three baselines, and write every artifact plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{render_table, score_baseline, Method, MethodScore, Stat};
use crate::dfg::compare_logs;
use crate::error::{Error, Result};
use crate::eventlog::{parse_csv, read_text, write_text, CsvOptions, EventLog};
use crate::neural::{init_model, Checkpoint, HyperParams, ModelState};
use crate::predict::{default_max_tokens, roll_forward, PredictionRun};
use crate::preprocess::{make_pairs, sanitize_log, select_head, split, write_pairs, TrainingPair, Vocabulary};
use crate::training::{train_with, EpochRecord, StopReason, TrainConfig, TrainLog};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const PELP_ROW: &str = "PELP";

/// Where the raw log comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogSource {
    Csv { path: PathBuf, options: CsvOptions },
    /// One trace per line, activities separated by spaces.
    Text { path: PathBuf },
}

impl LogSource {
    pub fn load(&self) -> Result<EventLog> {
        match self {
            LogSource::Csv { path, options } => parse_csv(path, options),
            LogSource::Text { path } => read_text(path),
        }
    }

    pub fn path(&self) -> &Path {
        match self {
            LogSource::Csv { path, .. } | LogSource::Text { path } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: LogSource,
    /// Keep only the first `n` traces.
    pub head: Option<usize>,
    pub train_fraction: f64,
    pub hyper: HyperParams,
    pub train: TrainConfig,
    /// Seeded runs per stochastic baseline.
    pub baseline_runs: usize,
    /// Seeds the baselines; the model seed lives in `hyper`.
    pub seed: u64,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl PipelineConfig {
    /// SHA-256 of the canonical JSON of everything except the output directory.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.train.validate()?;
        if self.baseline_runs < 2 {
            return Err(Error::Config("baseline runs must be at least 2".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Outcome of training one model on a training log and rolling it forward.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: ModelState,
    pub vocab: Vocabulary,
    pub pairs: Vec<TrainingPair>,
    pub max_tokens: usize,
    pub train_log: TrainLog,
    pub prediction: PredictionRun,
}

/// Builds pairs from `train`, trains from a fresh model and predicts
/// `horizon` traces.
pub fn fit_and_predict(
    train: &EventLog,
    horizon: usize,
    hyper: &HyperParams,
    config: &TrainConfig,
    on_best: impl FnMut(&ModelState, &EpochRecord) -> Result<()>,
) -> Result<Fit> {
    let vocab = Vocabulary::build(train);
    let pairs = make_pairs(train, hyper.window, &vocab)?;
    let max_tokens = hyper.max_tokens.unwrap_or_else(|| default_max_tokens(&pairs));
    let model = init_model(vocab.len(), hyper)?;
    let (model, train_log) = train_with(model, &pairs, hyper.learning_rate, config, on_best)?;
    let prediction = roll_forward(&model, &vocab, train, hyper.window, horizon, max_tokens)?;
    Ok(Fit {
        model,
        vocab,
        pairs,
        max_tokens,
        train_log,
        prediction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub stop: StopReason,
}

impl From<&TrainLog> for TrainingSummary {
    fn from(log: &TrainLog) -> Self {
        TrainingSummary {
            epochs: log.epochs.len(),
            best_epoch: log.best_epoch,
            best_loss: log.best_loss,
            stop: log.stop,
        }
    }
}

/// Scores of all four methods in fixed row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub std_estimator: String,
    pub train_traces: usize,
    pub test_traces: usize,
    pub predicted_traces: usize,
    pub training: TrainingSummary,
    pub prediction_warning: Option<String>,
    pub rows: Vec<MethodScore>,
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&MethodScore> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn table(&self) -> String {
        render_table(
            &format!("RMSE and MAE over {} held-out traces", self.test_traces),
            &self.rows,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub stage: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub artifacts: Vec<ArtifactRecord>,
}

impl Manifest {
    fn completed(&self, stage: &str) -> bool {
        self.artifacts.iter().any(|a| a.stage == stage)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Artifact file names inside the output directory.
pub mod files {
    pub const LOG: &str = "log.txt";
    pub const TRAIN: &str = "train.txt";
    pub const TEST: &str = "test.txt";
    pub const VOCAB: &str = "vocab.json";
    pub const PAIRS: &str = "pairs.bin";
    pub const MODEL: &str = "model.ckpt";
    pub const TRAIN_LOG: &str = "trainlog.csv";
    pub const TRAINING: &str = "training.json";
    pub const PREDICTION: &str = "prediction.txt";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_TEXT: &str = "report.txt";
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

struct Run<'a> {
    config: &'a PipelineConfig,
    manifest: Manifest,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    /// Completed stages whose artifacts are unchanged can be reused.
    fn reusable(&self, stage: &str) -> bool {
        self.manifest.completed(stage)
            && self
                .manifest
                .artifacts
                .iter()
                .filter(|a| a.stage == stage)
                .all(|a| sha256_file(&self.config.out_dir.join(&a.path)).is_ok_and(|h| h == a.sha256))
    }

    fn record(&mut self, stage: &str, names: &[&str]) -> Result<()> {
        self.manifest.artifacts.retain(|a| a.stage != stage);
        for name in names {
            let sha256 = sha256_file(&self.path(name))?;
            self.manifest.artifacts.push(ArtifactRecord {
                stage: stage.to_string(),
                path: PathBuf::from(name),
                sha256,
            });
        }
        let json = serde_json::to_vec_pretty(&self.manifest)?;
        write_file(&self.path(MANIFEST_FILE), &json)
    }

    fn stage<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        f(self).map_err(|source| Error::Stage {
            stage,
            completed: self
                .manifest
                .artifacts
                .iter()
                .map(|a| self.config.out_dir.join(&a.path))
                .collect(),
            source: Box::new(source),
        })
    }
}

fn load_manifest(config: &PipelineConfig, hash: &str) -> Manifest {
    let fresh = Manifest {
        tool_version: TOOL_VERSION.into(),
        config_hash: hash.to_string(),
        seed: config.seed,
        config: config.clone(),
        artifacts: Vec::new(),
    };
    let path = config.out_dir.join(MANIFEST_FILE);
    match fs::read(&path).ok().and_then(|b| serde_json::from_slice::<Manifest>(&b).ok()) {
        Some(m) if m.config_hash == hash && m.tool_version == TOOL_VERSION => m,
        _ => fresh,
    }
}

/// Runs every stage, reusing stages recorded in an existing manifest with the
/// same config hash whose artifacts are intact.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvalReport> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let hash = config.hash();
    let mut run = Run {
        config,
        manifest: load_manifest(config, &hash),
    };

    let (train, test) = run.stage("preprocess", |run| {
        if run.reusable("preprocess") {
            return Ok((read_text(run.path(files::TRAIN))?, read_text(run.path(files::TEST))?));
        }
        let raw = config.source.load()?;
        let log = sanitize_log(&raw)?;
        let log = match config.head {
            Some(n) => select_head(&log, n),
            None => log,
        };
        let (train, test) = split(&log, config.train_fraction)?;
        write_text(&log, run.path(files::LOG))?;
        write_text(&train, run.path(files::TRAIN))?;
        write_text(&test, run.path(files::TEST))?;
        run.record("preprocess", &[files::LOG, files::TRAIN, files::TEST])?;
        Ok((train, test))
    })?;

    let (vocab, pairs) = run.stage("pairs", |run| {
        let vocab = Vocabulary::build(&train);
        let pairs = make_pairs(&train, config.hyper.window, &vocab)?;
        if !run.reusable("pairs") {
            vocab.save(run.path(files::VOCAB))?;
            write_pairs(run.path(files::PAIRS), &pairs, config.hyper.window, &vocab)?;
            run.record("pairs", &[files::VOCAB, files::PAIRS])?;
        }
        Ok((vocab, pairs))
    })?;
    let max_tokens = config.hyper.max_tokens.unwrap_or_else(|| default_max_tokens(&pairs));

    let (model, summary) = run.stage("train", |run| {
        if run.reusable("train") {
            let ckpt = Checkpoint::load(run.path(files::MODEL))?;
            let path = run.path(files::TRAINING);
            let summary: TrainingSummary = serde_json::from_slice(&fs::read(&path).map_err(|e| Error::io(&path, e))?)?;
            return Ok((ckpt.model, summary));
        }
        let model = init_model(vocab.len(), &config.hyper)?;
        let (model, log) = train_with(model, &pairs, config.hyper.learning_rate, &config.train, |_, _| Ok(()))?;
        let ckpt = Checkpoint {
            model,
            vocab: vocab.clone(),
            window: config.hyper.window,
            max_tokens,
            learning_rate: config.hyper.learning_rate,
        };
        ckpt.save(run.path(files::MODEL))?;
        write_file(&run.path(files::TRAIN_LOG), log.to_csv().as_bytes())?;
        let summary = TrainingSummary::from(&log);
        write_file(&run.path(files::TRAINING), &serde_json::to_vec_pretty(&summary)?)?;
        run.record("train", &[files::MODEL, files::TRAIN_LOG, files::TRAINING])?;
        Ok((ckpt.model, summary))
    })?;

    let prediction = run.stage("predict", |run| {
        let prediction = roll_forward(&model, &vocab, &train, config.hyper.window, test.len(), max_tokens)?;
        write_text(&prediction.to_log(), run.path(files::PREDICTION))?;
        run.record("predict", &[files::PREDICTION])?;
        Ok(prediction)
    })?;

    run.stage("evaluate", |run| {
        let mut rows = Vec::with_capacity(4);
        for method in Method::ALL {
            rows.push(score_baseline(method, &train, &test, config.baseline_runs, config.seed)?);
        }
        let (rmse, mae) = compare_logs(&prediction.to_log(), &test);
        rows.push(MethodScore {
            method: PELP_ROW.into(),
            rmse: Stat::exact(rmse),
            mae: Stat::exact(mae),
            runs: 1,
        });
        let report = EvalReport {
            tool_version: TOOL_VERSION.into(),
            config_hash: hash.clone(),
            seed: config.seed,
            std_estimator: crate::baselines::STD_ESTIMATOR.into(),
            train_traces: train.len(),
            test_traces: test.len(),
            predicted_traces: prediction.traces.len(),
            training: summary.clone(),
            prediction_warning: prediction.warning.clone(),
            rows,
        };
        write_file(&run.path(files::REPORT_JSON), &serde_json::to_vec_pretty(&report)?)?;
        write_file(&run.path(files::REPORT_TEXT), report.table().as_bytes())?;
        run.record("evaluate", &[files::REPORT_JSON, files::REPORT_TEXT])?;
        Ok(report)
    })
}
