use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::preprocess::WindowSpec;

/// Weights of one GRU layer. Gate blocks are stacked `[reset; update; candidate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b_ih: Tensor,
    pub b_hh: Tensor,
}

impl GruParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            w_ih: Tensor::zeros(&[3 * hidden, input]),
            w_hh: Tensor::zeros(&[3 * hidden, hidden]),
            b_ih: Tensor::zeros(&[3 * hidden]),
            b_hh: Tensor::zeros(&[3 * hidden]),
        }
    }
}

/// Additive alignment: `score_j = v . tanh(W_q h + W_k e_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_query: Tensor,
    pub w_key: Tensor,
    pub v: Tensor,
}

/// Every learnable tensor of the encoder-decoder. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub enc_embedding: Tensor,
    pub encoder: GruParams,
    pub dec_embedding: Tensor,
    pub attention: AttentionParams,
    pub decoder: GruParams,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

/// Canonical tensor names, in checkpoint order.
pub const PARAM_NAMES: [&str; 15] = [
    "enc_embedding",
    "enc_w_ih",
    "enc_w_hh",
    "enc_b_ih",
    "enc_b_hh",
    "dec_embedding",
    "att_w_query",
    "att_w_key",
    "att_v",
    "dec_w_ih",
    "dec_w_hh",
    "dec_b_ih",
    "dec_b_hh",
    "out_w",
    "out_b",
];

impl Params {
    pub fn zeros(vocab_size: usize, hidden: usize) -> Self {
        let d = hidden;
        Params {
            enc_embedding: Tensor::zeros(&[vocab_size, d]),
            encoder: GruParams::zeros(d, d),
            dec_embedding: Tensor::zeros(&[vocab_size, d]),
            attention: AttentionParams {
                w_query: Tensor::zeros(&[d, d]),
                w_key: Tensor::zeros(&[d, d]),
                v: Tensor::zeros(&[d]),
            },
            decoder: GruParams::zeros(2 * d, d),
            out_w: Tensor::zeros(&[vocab_size, d]),
            out_b: Tensor::zeros(&[vocab_size]),
        }
    }

    pub fn tensors(&self) -> [&Tensor; 15] {
        [
            &self.enc_embedding,
            &self.encoder.w_ih,
            &self.encoder.w_hh,
            &self.encoder.b_ih,
            &self.encoder.b_hh,
            &self.dec_embedding,
            &self.attention.w_query,
            &self.attention.w_key,
            &self.attention.v,
            &self.decoder.w_ih,
            &self.decoder.w_hh,
            &self.decoder.b_ih,
            &self.decoder.b_hh,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 15] {
        [
            &mut self.enc_embedding,
            &mut self.encoder.w_ih,
            &mut self.encoder.w_hh,
            &mut self.encoder.b_ih,
            &mut self.encoder.b_hh,
            &mut self.dec_embedding,
            &mut self.attention.w_query,
            &mut self.attention.w_key,
            &mut self.attention.v,
            &mut self.decoder.w_ih,
            &mut self.decoder.w_hh,
            &mut self.decoder.b_ih,
            &mut self.decoder.b_hh,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        PARAM_NAMES.into_iter().zip(self.tensors())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.scale(alpha);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Learnable parameters plus the architecture facts needed to run them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub params: Params,
    pub vocab_size: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelState {
    /// Biases zero, embeddings standard normal, other weights uniform in
    /// `(-1/sqrt(d), 1/sqrt(d))`, all from one seeded stream.
    pub fn new(vocab_size: usize, hidden: usize, dropout: f64, seed: u64) -> Self {
        let mut params = Params::zeros(vocab_size, hidden);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, t) in PARAM_NAMES.into_iter().zip(params.tensors_mut()) {
            if name.contains("_b_") || name == "out_b" {
                continue;
            }
            if name.ends_with("embedding") {
                for v in t.data_mut() {
                    *v = rng.sample(StandardNormal);
                }
            } else {
                for v in t.data_mut() {
                    *v = rng.gen_range(-bound..bound);
                }
            }
        }
        ModelState {
            params,
            vocab_size,
            hidden,
            dropout,
            seed,
        }
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub hidden_size: usize,
    pub dropout: f64,
    pub window: WindowSpec,
    /// Token cap per generation call; `None` means twice the longest target.
    pub max_tokens: Option<usize>,
    pub seed: u64,
}

pub const LEARNING_RATE_RANGE: (f64, f64) = (0.001, 0.3);
pub const HIDDEN_RANGE: (usize, usize) = (16, 1024);
pub const DROPOUT_RANGE: (f64, f64) = (0.001, 0.3);

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let in_range = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        if !in_range(self.learning_rate, LEARNING_RATE_RANGE) {
            return Err(Error::Config(format!(
                "learning rate {} outside {:?}",
                self.learning_rate, LEARNING_RATE_RANGE
            )));
        }
        if !(HIDDEN_RANGE.0..=HIDDEN_RANGE.1).contains(&self.hidden_size) {
            return Err(Error::Config(format!(
                "hidden size {} outside {:?}",
                self.hidden_size, HIDDEN_RANGE
            )));
        }
        if !in_range(self.dropout, DROPOUT_RANGE) {
            return Err(Error::Config(format!(
                "dropout {} outside {:?}",
                self.dropout, DROPOUT_RANGE
            )));
        }
        WindowSpec::new(self.window.input_traces, self.window.output_traces)?;
        Ok(())
    }
}

/// Fresh model for `vocab_size` tokens after validating the hyper-parameters.
pub fn init_model(vocab_size: usize, hyper: &HyperParams) -> Result<ModelState> {
    hyper.validate()?;
    Ok(ModelState::new(vocab_size, hyper.hidden_size, hyper.dropout, hyper.seed))
}
