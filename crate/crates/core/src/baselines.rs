//! Variant-frequency reference predictors and their repeated-run scoring.

use std::collections::BTreeMap;
use std::fmt;

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dfg::compare_logs;
use crate::error::{Error, Result};
use crate::eventlog::EventLog;

/// Distinct training variants in lexicographic order with their counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantDistribution {
    variants: Vec<Vec<String>>,
    counts: Vec<u64>,
}

impl VariantDistribution {
    pub fn from_log(train: &EventLog) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InsufficientTraces { required: 1, available: 0 });
        }
        let mut tally: BTreeMap<&[String], u64> = BTreeMap::new();
        for seq in train.sequences() {
            *tally.entry(seq).or_default() += 1;
        }
        let (variants, counts) = tally.into_iter().map(|(v, c)| (v.to_vec(), c)).unzip();
        Ok(VariantDistribution { variants, counts })
    }

    pub fn variants(&self) -> &[Vec<String>] {
        &self.variants
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Most frequent variant; the lexicographically smallest among ties.
    pub fn mode(&self) -> &[String] {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let i = self.counts.iter().position(|&c| c == max).unwrap_or(0);
        &self.variants[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    HighestFreq,
    RandomPred,
    WeightedProb,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::HighestFreq, Method::RandomPred, Method::WeightedProb];

    pub fn name(self) -> &'static str {
        match self {
            Method::HighestFreq => "HighestFreq",
            Method::RandomPred => "RandomPred",
            Method::WeightedProb => "WeightedProb",
        }
    }

    pub fn is_stochastic(self) -> bool {
        self != Method::HighestFreq
    }

    pub fn predict(self, dist: &VariantDistribution, horizon: usize, seed: u64) -> EventLog {
        match self {
            Method::HighestFreq => highest_freq(dist, horizon),
            Method::RandomPred => random_pred(dist, horizon, seed),
            Method::WeightedProb => weighted_prob(dist, horizon, seed),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "highestfreq" | "highest" => Ok(Method::HighestFreq),
            "randompred" | "random" => Ok(Method::RandomPred),
            "weightedprob" | "weighted" => Ok(Method::WeightedProb),
            _ => Err(Error::Config(format!("unknown baseline {s:?}"))),
        }
    }
}

/// The modal variant repeated `horizon` times.
pub fn highest_freq(dist: &VariantDistribution, horizon: usize) -> EventLog {
    EventLog::from_sequences(std::iter::repeat_n(dist.mode().to_vec(), horizon))
}

/// I.i.d. uniform draws over distinct variants.
pub fn random_pred(dist: &VariantDistribution, horizon: usize, seed: u64) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = Uniform::new(0, dist.variants.len());
    EventLog::from_sequences((0..horizon).map(|_| dist.variants[pick.sample(&mut rng)].clone()))
}

/// I.i.d. draws with probability `count / total`.
pub fn weighted_prob(dist: &VariantDistribution, horizon: usize, seed: u64) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = WeightedIndex::new(&dist.counts).expect("counts are positive");
    EventLog::from_sequences((0..horizon).map(|_| dist.variants[pick.sample(&mut rng)].clone()))
}

/// Mean and sample standard deviation (`n - 1` denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// `None` for a deterministic method.
    pub std: Option<f64>,
}

impl Stat {
    pub fn exact(value: f64) -> Self {
        Stat { mean: value, std: None }
    }

    pub fn sample(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config("sample statistics need at least 2 values".into()));
        }
        if values.iter().all(|&v| v == values[0]) {
            return Ok(Stat { mean: values[0], std: Some(0.0) });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Stat { mean, std: Some(var.sqrt()) })
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.std {
            Some(s) => write!(f, "{:.2}±{:.2}", self.mean, s),
            None => write!(f, "{:.2}", self.mean),
        }
    }
}

pub const STD_ESTIMATOR: &str = "sample (n-1)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub rmse: Stat,
    pub mae: Stat,
    pub runs: usize,
}

/// Scores `runs` predictions (run `k` gets seed `seed + k`) against `truth`
/// individually, then aggregates.
pub fn evaluate_stochastic(
    name: &str,
    mut predictor: impl FnMut(u64) -> Result<EventLog>,
    truth: &EventLog,
    runs: usize,
    seed: u64,
) -> Result<MethodScore> {
    if runs < 2 {
        return Err(Error::Config("runs must be at least 2".into()));
    }
    let mut rmses = Vec::with_capacity(runs);
    let mut maes = Vec::with_capacity(runs);
    for k in 0..runs as u64 {
        let predicted = predictor(seed.wrapping_add(k))?;
        let (r, m) = compare_logs(&predicted, truth);
        rmses.push(r);
        maes.push(m);
    }
    Ok(MethodScore {
        method: name.to_string(),
        rmse: Stat::sample(&rmses)?,
        mae: Stat::sample(&maes)?,
        runs,
    })
}

/// Scores one baseline: a single run for HighestFreq, `runs` seeded runs
/// otherwise. The horizon is the number of truth traces.
pub fn score_baseline(
    method: Method,
    train: &EventLog,
    truth: &EventLog,
    runs: usize,
    seed: u64,
) -> Result<MethodScore> {
    let dist = VariantDistribution::from_log(train)?;
    let horizon = truth.len();
    if method.is_stochastic() {
        evaluate_stochastic(method.name(), |s| Ok(method.predict(&dist, horizon, s)), truth, runs, seed)
    } else {
        let (r, m) = compare_logs(&highest_freq(&dist, horizon), truth);
        Ok(MethodScore {
            method: method.name().to_string(),
            rmse: Stat::exact(r),
            mae: Stat::exact(m),
            runs: 1,
        })
    }
}

/// Aligned text table with one row per method.
pub fn render_table(title: &str, rows: &[MethodScore]) -> String {
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|r| [r.method.clone(), r.rmse.to_string(), r.mae.to_string()])
        .collect();
    let header = ["Method".to_string(), "RMSE".to_string(), "MAE".to_string()];
    let widths: Vec<usize> = (0..3)
        .map(|c| {
            cells
                .iter()
                .chain(std::iter::once(&header))
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |r: &[String; 3]| {
        format!(
            "{:<w0$}  {:>w1$}  {:>w2$}\n",
            r[0],
            r[1],
            r[2],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2]
        )
    };
    let mut out = format!("{title}\n");
    out.push_str(&line(&header));
    for c in &cells {
        out.push_str(&line(c));
    }
    out
}
