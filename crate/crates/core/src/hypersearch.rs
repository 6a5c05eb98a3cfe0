//! Grid and random search over learning rate, hidden size, dropout and
//! window, with results appended to a resumable CSV.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dfg::compare_logs;
use crate::error::{Error, Result};
use crate::eventlog::EventLog;
use crate::neural::{HyperParams, DROPOUT_RANGE, HIDDEN_RANGE, LEARNING_RATE_RANGE};
use crate::pipeline::fit_and_predict;
use crate::preprocess::{WindowSpec, MAX_WINDOW};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub hidden_size: (usize, usize),
    pub dropout: (f64, f64),
    /// Bounds shared by `p` and `q`.
    pub window: (usize, usize),
    /// Fixed choices, recorded but never searched.
    pub optimizer: String,
    pub loss: String,
    pub teacher_forcing: bool,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate: LEARNING_RATE_RANGE,
            hidden_size: HIDDEN_RANGE,
            dropout: DROPOUT_RANGE,
            window: (1, MAX_WINDOW),
            optimizer: "sgd".into(),
            loss: "cross-entropy".into(),
            teacher_forcing: true,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let within_f = |(lo, hi): (f64, f64), (a, b): (f64, f64)| a <= lo && lo <= hi && hi <= b && lo > 0.0;
        let within_u = |(lo, hi): (usize, usize), (a, b): (usize, usize)| a <= lo && lo <= hi && hi <= b;
        if !within_f(self.learning_rate, LEARNING_RATE_RANGE)
            || !within_f(self.dropout, DROPOUT_RANGE)
            || !within_u(self.hidden_size, HIDDEN_RANGE)
            || !within_u(self.window, (1, MAX_WINDOW))
        {
            return Err(Error::Config("search space exceeds the supported bounds".into()));
        }
        Ok(())
    }

    fn check(&self, hyper: &HyperParams) -> Result<()> {
        hyper.validate()?;
        let (lo, hi) = self.window;
        let w = hyper.window;
        let inside = |v: f64, (a, b): (f64, f64)| a <= v && v <= b;
        if !inside(hyper.learning_rate, self.learning_rate)
            || !inside(hyper.dropout, self.dropout)
            || !(self.hidden_size.0..=self.hidden_size.1).contains(&hyper.hidden_size)
            || !(lo..=hi).contains(&w.input_traces)
            || !(lo..=hi).contains(&w.output_traces)
        {
            return Err(Error::Config(format!("trial {hyper:?} lies outside the search space")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hyper: HyperParams,
}

/// Explicit value lists for a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub learning_rate: Vec<f64>,
    pub hidden_size: Vec<usize>,
    pub dropout: Vec<f64>,
    pub window: Vec<WindowSpec>,
}

/// Cartesian product in axis order learning rate, hidden size, dropout,
/// window (window varies fastest). Every trial gets `seed`.
pub fn grid(space: &SearchSpace, axes: &GridAxes, seed: u64) -> Result<Vec<Trial>> {
    space.validate()?;
    let mut trials = Vec::new();
    for &learning_rate in &axes.learning_rate {
        for &hidden_size in &axes.hidden_size {
            for &dropout in &axes.dropout {
                for &window in &axes.window {
                    let hyper = HyperParams {
                        learning_rate,
                        hidden_size,
                        dropout,
                        window,
                        max_tokens: None,
                        seed,
                    };
                    space.check(&hyper)?;
                    trials.push(Trial {
                        index: trials.len(),
                        hyper,
                    });
                }
            }
        }
    }
    Ok(trials)
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.gen_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
}

/// `n` independent trials; trial `k` is drawn from, and seeds its model
/// with, `master_seed + k`.
pub fn random(space: &SearchSpace, n: usize, master_seed: u64) -> Result<Vec<Trial>> {
    space.validate()?;
    if n == 0 {
        return Err(Error::Config("random search needs at least one trial".into()));
    }
    (0..n)
        .map(|k| {
            let seed = master_seed.wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let learning_rate = log_uniform(&mut rng, space.learning_rate);
            let hidden_size = rng.gen_range(space.hidden_size.0..=space.hidden_size.1);
            let dropout = log_uniform(&mut rng, space.dropout);
            let p = rng.gen_range(space.window.0..=space.window.1);
            let q = rng.gen_range(space.window.0..=space.window.1);
            Ok(Trial {
                index: k,
                hyper: HyperParams {
                    learning_rate,
                    hidden_size,
                    dropout,
                    window: WindowSpec::new(p, q)?,
                    max_tokens: None,
                    seed,
                },
            })
        })
        .collect()
}

/// One row of the results table. Failed trials carry `error` and no scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub learning_rate: f64,
    pub hidden_size: usize,
    pub dropout: f64,
    pub input_traces: usize,
    pub output_traces: usize,
    pub seed: u64,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub epochs: Option<usize>,
    pub best_loss: Option<f64>,
    pub error: Option<String>,
}

impl TrialResult {
    fn new(trial: &Trial) -> Self {
        let h = &trial.hyper;
        TrialResult {
            index: trial.index,
            learning_rate: h.learning_rate,
            hidden_size: h.hidden_size,
            dropout: h.dropout,
            input_traces: h.window.input_traces,
            output_traces: h.window.output_traces,
            seed: h.seed,
            rmse: None,
            mae: None,
            epochs: None,
            best_loss: None,
            error: None,
        }
    }

    fn same_trial(&self, other: &TrialResult) -> bool {
        let strip = |r: &TrialResult| TrialResult {
            rmse: None,
            mae: None,
            epochs: None,
            best_loss: None,
            error: None,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

/// Successful trials by (RMSE, MAE, index), then failures by index.
pub fn rank(results: &[TrialResult]) -> Vec<TrialResult> {
    let mut out = results.to_vec();
    out.sort_by(|a, b| {
        let key = |r: &TrialResult| match (r.rmse, r.mae) {
            (Some(x), Some(y)) => (0, x, y),
            _ => (1, 0.0, 0.0),
        };
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(a.index.cmp(&b.index))
    });
    out
}

fn read_results(path: &Path) -> Result<Vec<TrialResult>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn append_result(path: &Path, result: &TrialResult) -> Result<()> {
    let fresh = !path.exists() || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(result)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Runs one trial: train on `train`, roll forward over `test.len()` traces
/// and score against `test`.
pub fn run_trial(trial: &Trial, train: &EventLog, test: &EventLog, config: &TrainConfig) -> TrialResult {
    let mut result = TrialResult::new(trial);
    match fit_and_predict(train, test.len(), &trial.hyper, config, |_, _| Ok(())) {
        Ok(fit) => {
            let (rmse, mae) = compare_logs(&fit.prediction.to_log(), test);
            result.rmse = Some(rmse);
            result.mae = Some(mae);
            result.epochs = Some(fit.train_log.epochs.len());
            result.best_loss = Some(fit.train_log.best_loss);
            result.error = fit.prediction.warning;
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

/// Runs every trial not already present in `report`, appending each result
/// as it finishes, and returns all results ranked.
pub fn run_search(
    trials: &[Trial],
    train: &EventLog,
    test: &EventLog,
    config: &TrainConfig,
    report: Option<&Path>,
) -> Result<Vec<TrialResult>> {
    if trials.is_empty() {
        return Err(Error::Config("no trials to run".into()));
    }
    let mut done = match report {
        Some(p) if p.exists() && fs::metadata(p).map_err(|e| Error::io(p, e))?.len() > 0 => read_results(p)?,
        _ => Vec::new(),
    };
    for trial in trials {
        let expected = TrialResult::new(trial);
        if let Some(prev) = done.iter().find(|r| r.index == trial.index) {
            if !prev.same_trial(&expected) {
                return Err(Error::Config(format!(
                    "report already holds a different trial {}; use a new report path",
                    trial.index
                )));
            }
            continue;
        }
        let result = run_trial(trial, train, test, config);
        if let Some(p) = report {
            append_result(p, &result)?;
        }
        done.push(result);
    }
    done.retain(|r| trials.iter().any(|t| t.index == r.index));
    Ok(rank(&done))
}
