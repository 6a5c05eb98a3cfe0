//! Greedy autoregressive generation of future traces with a rolling window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::EventLog;
use crate::neural::{decode_step, encode, ModelState};
use crate::preprocess::{TrainingPair, Vocabulary, WindowSpec, EOT, SOS};

/// Twice the longest target sequence, at least 1.
pub fn default_max_tokens(pairs: &[TrainingPair]) -> usize {
    pairs.iter().map(|p| p.y.len()).max().unwrap_or(0).max(1) * 2
}

/// Index of the largest logit other than SOS; ties go to the lowest id.
fn argmax(logits: &[f64]) -> usize {
    let mut best = EOT;
    for (i, &v) in logits.iter().enumerate().skip(EOT + 1) {
        if v > logits[best] {
            best = i;
        }
    }
    debug_assert_ne!(best, SOS);
    best
}

/// Greedily decodes up to `max_tokens` ids, stopping after `eots` EOTs.
pub fn generate_tokens(model: &ModelState, input: &[usize], eots: usize, max_tokens: usize) -> Result<Vec<usize>> {
    let enc = encode(model, input)?;
    let mut hidden = enc.hidden.clone();
    let mut prev = SOS;
    let mut out = Vec::new();
    let mut seen = 0;
    while seen < eots && out.len() < max_tokens {
        let step = decode_step(model, prev, &hidden, &enc)?;
        let token = argmax(&step.logits);
        hidden = step.hidden;
        out.push(token);
        prev = token;
        if token == EOT {
            seen += 1;
        }
    }
    Ok(out)
}

/// Splits a generated stream into EOT-terminated traces, dropping the
/// unterminated tail and empty traces.
pub fn complete_traces(vocab: &Vocabulary, tokens: &[usize]) -> Result<Vec<Vec<String>>> {
    let end = tokens.iter().rposition(|&t| t == EOT).map_or(0, |i| i + 1);
    let mut traces = vocab.decode_traces(&tokens[..end])?;
    traces.retain(|t| !t.is_empty());
    Ok(traces)
}

/// One generation call on `p` input traces, returning at most `q` complete
/// traces. Fails with [`Error::NoCompleteTrace`] if none is produced.
pub fn generate_step(
    model: &ModelState,
    vocab: &Vocabulary,
    input: &[Vec<String>],
    spec: WindowSpec,
    max_tokens: usize,
) -> Result<Vec<Vec<String>>> {
    if input.len() != spec.input_traces {
        return Err(Error::Config(format!(
            "window expects {} input traces, got {}",
            spec.input_traces,
            input.len()
        )));
    }
    let mut ids = Vec::new();
    for trace in input {
        ids.extend(vocab.encode_trace(trace)?);
    }
    let tokens = generate_tokens(model, &ids, spec.output_traces, max_tokens)?;
    let mut traces = complete_traces(vocab, &tokens)?;
    traces.truncate(spec.output_traces);
    if traces.is_empty() {
        return Err(Error::NoCompleteTrace);
    }
    Ok(traces)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRun {
    pub horizon: usize,
    pub max_tokens: usize,
    pub steps: usize,
    pub traces: Vec<Vec<String>>,
    /// Set when a step produced no complete trace and the run ended early.
    pub warning: Option<String>,
}

impl PredictionRun {
    pub fn to_log(&self) -> EventLog {
        EventLog::from_sequences(self.traces.iter().cloned())
    }
}

/// Seeds the window with the last `p` training traces and generates until
/// `horizon` traces exist. Each next window is the last `p` traces of the
/// previous window followed by the newly generated ones.
pub fn roll_forward(
    model: &ModelState,
    vocab: &Vocabulary,
    train: &EventLog,
    spec: WindowSpec,
    horizon: usize,
    max_tokens: usize,
) -> Result<PredictionRun> {
    let p = spec.input_traces;
    if train.len() < p {
        return Err(Error::InsufficientTraces {
            required: p,
            available: train.len(),
        });
    }
    let mut window: Vec<Vec<String>> = train.traces()[train.len() - p..]
        .iter()
        .map(|t| t.activities.clone())
        .collect();
    let mut run = PredictionRun {
        horizon,
        max_tokens,
        steps: 0,
        traces: Vec::new(),
        warning: None,
    };
    while run.traces.len() < horizon {
        run.steps += 1;
        let generated = match generate_step(model, vocab, &window, spec, max_tokens) {
            Ok(g) => g,
            Err(Error::NoCompleteTrace) => {
                run.warning = Some(format!(
                    "step {} produced no complete trace; stopped at {} of {horizon} traces",
                    run.steps,
                    run.traces.len()
                ));
                break;
            }
            Err(e) => return Err(e),
        };
        let room = horizon - run.traces.len();
        run.traces.extend(generated.iter().take(room).cloned());
        window.extend(generated);
        window.drain(..window.len() - p);
    }
    Ok(run)
}
