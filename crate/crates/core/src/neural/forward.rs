//! Forward passes: GRU encoder, attention decoder step and teacher-forced loss.
//!
//! GRU cell, gates stacked as `[r; z; n]`:
//!
//! ```text
//! r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//! h' = (1 - z) * n + z * h
//! ```
//!
//! Decoder step with previous token `t` and previous hidden `h`:
//!
//! ```text
//! e       = dropout(E_dec[t])
//! u_j     = tanh(W_q h + W_k enc_j)      score_j = v . u_j
//! alpha   = softmax(score)               ctx = sum_j alpha_j enc_j
//! h'      = GRU([e; ctx], h)
//! logits  = W_out h' + b_out
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::model::{GruParams, ModelState, Params};
use super::tensor::{affine, dot, sigmoid, softmax};
use crate::error::{Error, Result};
use crate::preprocess::{TrainingPair, SOS};

/// Activations of one GRU step kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct GruStep {
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub n: Vec<f64>,
    /// `W_hn h + b_hn`, needed for the reset-gate gradient.
    pub ghn: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn gru_step(p: &GruParams, x: &[f64], h_prev: &[f64]) -> GruStep {
    let d = h_prev.len();
    let mut gi = vec![0.0; 3 * d];
    let mut gh = vec![0.0; 3 * d];
    affine(&p.w_ih, x, Some(p.b_ih.data()), &mut gi);
    affine(&p.w_hh, h_prev, Some(p.b_hh.data()), &mut gh);
    let mut r = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut n = vec![0.0; d];
    let mut h = vec![0.0; d];
    for k in 0..d {
        r[k] = sigmoid(gi[k] + gh[k]);
        z[k] = sigmoid(gi[d + k] + gh[d + k]);
        n[k] = (gi[2 * d + k] + r[k] * gh[2 * d + k]).tanh();
        h[k] = (1.0 - z[k]) * n[k] + z[k] * h_prev[k];
    }
    GruStep {
        r,
        z,
        n,
        ghn: gh[2 * d..].to_vec(),
        h,
    }
}

/// Encoder outputs plus the attention keys precomputed from them.
#[derive(Debug, Clone)]
pub struct Encoded {
    /// `len x d`, row `j` is the hidden state after token `j`.
    pub outputs: Vec<f64>,
    /// `len x d`, row `j` is `W_k outputs_j`.
    pub keys: Vec<f64>,
    /// Final hidden state (zero vector for empty input).
    pub hidden: Vec<f64>,
    pub len: usize,
}

impl Encoded {
    pub fn output(&self, j: usize) -> &[f64] {
        let d = self.hidden.len();
        &self.outputs[j * d..(j + 1) * d]
    }
}

fn check_tokens(model: &ModelState, tokens: &[usize]) -> Result<()> {
    match tokens.iter().find(|&&t| t >= model.vocab_size) {
        Some(&id) => Err(Error::TokenOutOfRange {
            id,
            vocab_size: model.vocab_size,
        }),
        None => Ok(()),
    }
}

pub(crate) fn encode_cached(params: &Params, hidden: usize, tokens: &[usize]) -> (Encoded, Vec<GruStep>) {
    let d = hidden;
    let mut h = vec![0.0; d];
    let mut outputs = Vec::with_capacity(tokens.len() * d);
    let mut steps = Vec::with_capacity(tokens.len());
    for &t in tokens {
        let step = gru_step(&params.encoder, params.enc_embedding.row(t), &h);
        h.clone_from(&step.h);
        outputs.extend_from_slice(&step.h);
        steps.push(step);
    }
    let mut keys = vec![0.0; outputs.len()];
    for (out, key) in outputs.chunks_exact(d).zip(keys.chunks_exact_mut(d)) {
        affine(&params.attention.w_key, out, None, key);
    }
    let enc = Encoded {
        outputs,
        keys,
        hidden: h,
        len: tokens.len(),
    };
    (enc, steps)
}

/// Runs the encoder GRU over `tokens` from a zero initial state.
pub fn encode(model: &ModelState, tokens: &[usize]) -> Result<Encoded> {
    check_tokens(model, tokens)?;
    Ok(encode_cached(&model.params, model.hidden, tokens).0)
}

/// Activations of one decoder step.
#[derive(Debug, Clone)]
pub(crate) struct DecoderStep {
    pub token: usize,
    pub mask: Option<Vec<f64>>,
    /// GRU input `[embedding; context]`.
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    /// `len x d` attention pre-activations after tanh.
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gru: GruStep,
    pub logits: Vec<f64>,
}

pub(crate) fn decoder_step(
    params: &Params,
    token: usize,
    mask: Option<Vec<f64>>,
    h_prev: &[f64],
    enc: &Encoded,
) -> DecoderStep {
    let d = h_prev.len();
    let len = enc.len;
    let mut input = vec![0.0; 2 * d];
    let emb = params.dec_embedding.row(token);
    match &mask {
        Some(m) => input[..d].iter_mut().zip(emb.iter().zip(m)).for_each(|(o, (e, m))| *o = e * m),
        None => input[..d].copy_from_slice(emb),
    }

    let mut query = vec![0.0; d];
    affine(&params.attention.w_query, h_prev, None, &mut query);
    let v = params.attention.v.data();
    let mut u = vec![0.0; len * d];
    let mut scores = vec![0.0; len];
    for j in 0..len {
        let uj = &mut u[j * d..(j + 1) * d];
        for ((o, q), k) in uj.iter_mut().zip(&query).zip(&enc.keys[j * d..(j + 1) * d]) {
            *o = (q + k).tanh();
        }
        scores[j] = dot(v, uj);
    }
    let mut alpha = vec![0.0; len];
    softmax(&scores, &mut alpha);
    let ctx = &mut input[d..];
    for (j, a) in alpha.iter().enumerate() {
        super::tensor::axpy(*a, enc.output(j), ctx);
    }

    let gru = gru_step(&params.decoder, &input, h_prev);
    let mut logits = vec![0.0; params.out_b.len()];
    affine(&params.out_w, &gru.h, Some(params.out_b.data()), &mut logits);
    DecoderStep {
        token,
        mask,
        input,
        h_prev: h_prev.to_vec(),
        u,
        alpha,
        gru,
        logits,
    }
}

/// Result of a single inference-mode decoder step.
#[derive(Debug, Clone)]
pub struct DecodeOutput {
    pub logits: Vec<f64>,
    pub hidden: Vec<f64>,
    pub attention: Vec<f64>,
}

/// One decoder step without dropout.
pub fn decode_step(model: &ModelState, prev_token: usize, hidden: &[f64], enc: &Encoded) -> Result<DecodeOutput> {
    if enc.len == 0 {
        return Err(Error::EmptyEncoderOutputs);
    }
    check_tokens(model, &[prev_token])?;
    let step = decoder_step(&model.params, prev_token, None, hidden, enc);
    Ok(DecodeOutput {
        logits: step.logits,
        hidden: step.gru.h,
        attention: step.alpha,
    })
}

/// Where decoder-input dropout masks come from.
pub enum Dropout<'a> {
    /// Inference mode: no dropout.
    Off,
    /// Inverted dropout with the model's rate, masks drawn from `rng`.
    Sample(&'a mut ChaCha8Rng),
    /// Replay previously recorded masks, one per decoder step.
    Fixed(&'a [Option<Vec<f64>>]),
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) x: Vec<usize>,
    pub(crate) y: Vec<usize>,
    pub(crate) enc: Encoded,
    pub(crate) enc_steps: Vec<GruStep>,
    pub(crate) dec_steps: Vec<DecoderStep>,
    pub(crate) loss: f64,
}

impl ForwardCache {
    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// Dropout masks actually used, for replay.
    pub fn masks(&self) -> Vec<Option<Vec<f64>>> {
        self.dec_steps.iter().map(|s| s.mask.clone()).collect()
    }
}

/// `-log softmax(logits)[target]`, stable.
pub(crate) fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

/// Teacher-forced forward pass: the decoder reads `SOS, y_0 .. y_{T-2}` and
/// is scored on `y_0 .. y_{T-1}`. Loss is the mean token cross-entropy.
pub fn forward_loss(model: &ModelState, pair: &TrainingPair, dropout: Dropout<'_>) -> Result<(f64, ForwardCache)> {
    forward_tokens(model, &pair.x, &pair.y, dropout)
}

pub fn forward_tokens(model: &ModelState, x: &[usize], y: &[usize], mut dropout: Dropout<'_>) -> Result<(f64, ForwardCache)> {
    check_tokens(model, x)?;
    check_tokens(model, y)?;
    if x.is_empty() {
        return Err(Error::EmptyEncoderOutputs);
    }
    let d = model.hidden;
    let (enc, enc_steps) = encode_cached(&model.params, d, x);
    let mut h = enc.hidden.clone();
    let mut dec_steps = Vec::with_capacity(y.len());
    let mut total = 0.0;
    let keep = 1.0 - model.dropout;
    for (t, &target) in y.iter().enumerate() {
        let prev = if t == 0 { SOS } else { y[t - 1] };
        let mask = match &mut dropout {
            Dropout::Off => None,
            Dropout::Sample(_) if model.dropout <= 0.0 => None,
            Dropout::Sample(rng) => Some(
                (0..d)
                    .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect(),
            ),
            Dropout::Fixed(masks) => masks.get(t).cloned().flatten(),
        };
        let step = decoder_step(&model.params, prev, mask, &h, &enc);
        total += cross_entropy(&step.logits, target);
        h.clone_from(&step.gru.h);
        dec_steps.push(step);
    }
    let loss = if y.is_empty() { 0.0 } else { total / y.len() as f64 };
    let cache = ForwardCache {
        x: x.to_vec(),
        y: y.to_vec(),
        enc,
        enc_steps,
        dec_steps,
        loss,
    };
    Ok((loss, cache))
}

/// Mean loss of `model` over `pairs` in inference mode.
pub fn mean_loss(model: &ModelState, pairs: &[TrainingPair]) -> Result<f64> {
    let mut sum = 0.0;
    for pair in pairs {
        sum += forward_loss(model, pair, Dropout::Off)?.0;
    }
    Ok(sum / pairs.len().max(1) as f64)
}
