//! Epoch loop with patience-based early stopping and best-model retention.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{backward_scaled, forward_loss, mean_loss, sgd_step, Dropout, ModelState};
use crate::preprocess::TrainingPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Stop once this many epochs pass without improvement.
    pub patience: usize,
    pub max_epochs: Option<usize>,
    /// An epoch improves on the best loss only if it is lower by more than this.
    pub min_delta: f64,
    /// Epoch losses at or below this count as zero and end training.
    pub zero_loss: f64,
    /// Which per-pair objective the SGD step descends.
    #[serde(default)]
    pub objective: Objective,
}

/// Per-pair objective for the update. Reported epoch losses are always the
/// mean token cross-entropy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Sum of token cross-entropies: the step size grows with `|y|`.
    #[default]
    Sum,
    /// Mean token cross-entropy.
    Mean,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Objective::Sum),
            "mean" => Ok(Objective::Mean),
            _ => Err(Error::Config(format!("unknown objective {s:?}"))),
        }
    }
}

/// Losses below this print as `0.0000` at four decimals.
pub const DEFAULT_ZERO_LOSS: f64 = 5e-5;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            patience: 100,
            max_epochs: None,
            min_delta: 0.0,
            zero_loss: DEFAULT_ZERO_LOSS,
            objective: Objective::Sum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if [self.min_delta, self.zero_loss].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Config("min_delta and zero_loss must be non-negative".into()));
        }
        if self.max_epochs == Some(0) {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Patience,
    ZeroLoss,
    MaxEpochs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub stop: StopReason,
}

impl TrainLog {
    /// `epoch,loss,seconds` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,seconds\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{:e},{:.6}\n", r.epoch, r.loss, r.seconds));
        }
        s
    }
}

/// Early-stopping state machine fed one epoch loss at a time.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    config: TrainConfig,
    epoch: usize,
    best_epoch: usize,
    best_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop(StopReason, bool),
}

impl EarlyStopper {
    pub fn new(config: TrainConfig) -> Self {
        EarlyStopper {
            config,
            epoch: 0,
            best_epoch: 0,
            best_loss: f64::INFINITY,
        }
    }

    /// Records the loss of the next epoch. `Stop(reason, improved)` also says
    /// whether that final epoch was an improvement.
    pub fn observe(&mut self, loss: f64) -> Verdict {
        self.epoch += 1;
        let improved = loss < self.best_loss - self.config.min_delta || self.best_epoch == 0;
        if improved {
            self.best_loss = loss;
            self.best_epoch = self.epoch;
        }
        if loss <= self.config.zero_loss {
            Verdict::Stop(StopReason::ZeroLoss, improved)
        } else if self.epoch - self.best_epoch >= self.config.patience {
            Verdict::Stop(StopReason::Patience, improved)
        } else if self.config.max_epochs.is_some_and(|m| self.epoch >= m) {
            Verdict::Stop(StopReason::MaxEpochs, improved)
        } else if improved {
            Verdict::Improved
        } else {
            Verdict::NoImprovement
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

/// Trains with plain SGD, one update per pair, visiting pairs in order.
///
/// The loss of an epoch is the mean inference-mode loss over all pairs after
/// that epoch's updates, so the returned best model replays to exactly the
/// recorded best loss.
pub fn train(
    model: ModelState,
    pairs: &[TrainingPair],
    learning_rate: f64,
    config: &TrainConfig,
) -> Result<(ModelState, TrainLog)> {
    train_with(model, pairs, learning_rate, config, |_, _| Ok(()))
}

/// As [`train`], calling `on_best` whenever a new best model is found, e.g.
/// to write a checkpoint.
pub fn train_with(
    mut model: ModelState,
    pairs: &[TrainingPair],
    learning_rate: f64,
    config: &TrainConfig,
    mut on_best: impl FnMut(&ModelState, &EpochRecord) -> Result<()>,
) -> Result<(ModelState, TrainLog)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Config("no training pairs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x5eed_d20f);
    let mut stopper = EarlyStopper::new(config.clone());
    let mut best = model.clone();
    let mut epochs = Vec::new();

    loop {
        let epoch = epochs.len() + 1;
        let start = Instant::now();
        for (i, pair) in pairs.iter().enumerate() {
            let (loss, cache) = forward_loss(&model, pair, Dropout::Sample(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { what: "loss", epoch, pair: i });
            }
            let scale = match config.objective {
                Objective::Sum => pair.y.len() as f64,
                Objective::Mean => 1.0,
            };
            let grads = backward_scaled(&model, &cache, scale);
            sgd_step(&mut model, &grads, learning_rate).map_err(|_| Error::NonFinite {
                what: "gradient",
                epoch,
                pair: i,
            })?;
        }
        let loss = mean_loss(&model, pairs)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: "loss", epoch, pair: pairs.len() });
        }
        let record = EpochRecord {
            epoch,
            loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        epochs.push(record);
        let verdict = stopper.observe(loss);
        if matches!(verdict, Verdict::Improved | Verdict::Stop(_, true)) {
            best.clone_from(&model);
            on_best(&best, &record)?;
        }
        if let Verdict::Stop(stop, _) = verdict {
            let log = TrainLog {
                epochs,
                best_epoch: stopper.best_epoch(),
                best_loss: stopper.best_loss(),
                stop,
            };
            return Ok((best, log));
        }
    }
}
