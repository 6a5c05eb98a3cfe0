//! Checkpoint container: one line of JSON header, then every parameter tensor
//! as little-endian `f64` in the order listed by the header.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelState, Params, PARAM_NAMES};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::preprocess::{Vocabulary, WindowSpec};

const FORMAT: &str = "logcast-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    tool_version: String,
    vocab_size: usize,
    hidden: usize,
    dropout: f64,
    seed: u64,
    learning_rate: f64,
    window: WindowSpec,
    max_tokens: usize,
    vocab_hash: String,
    vocab: Vec<String>,
    tensors: Vec<TensorEntry>,
}

/// A trained model together with what prediction needs to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelState,
    pub vocab: Vocabulary,
    pub window: WindowSpec,
    pub max_tokens: usize,
    pub learning_rate: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            vocab_size: m.vocab_size,
            hidden: m.hidden,
            dropout: m.dropout,
            seed: m.seed,
            learning_rate: self.learning_rate,
            window: self.window,
            max_tokens: self.max_tokens,
            vocab_hash: self.vocab.fingerprint(),
            vocab: self.vocab.tokens().to_vec(),
            tensors: m
                .params
                .named()
                .map(|(name, t)| TensorEntry {
                    name: name.into(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        for t in m.params.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut r = BufReader::new(reader);
        let mut line = String::new();
        r.read_line(&mut line)
            .map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let header: Header = serde_json::from_str(line.trim_end())?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(Error::format("checkpoint", "unrecognized header"));
        }
        let vocab = Vocabulary::from_json(&vocab_json(&header.vocab)?)?;
        if vocab.fingerprint() != header.vocab_hash || vocab.len() != header.vocab_size {
            return Err(Error::format("checkpoint", "vocabulary hash mismatch"));
        }
        let mut params = Params::zeros(header.vocab_size, header.hidden);
        if header.tensors.len() != PARAM_NAMES.len() {
            return Err(Error::format("checkpoint", "unexpected tensor list"));
        }
        let mut buf = [0u8; 8];
        for ((entry, name), t) in header.tensors.iter().zip(PARAM_NAMES).zip(params.tensors_mut()) {
            if entry.name != name || entry.shape != t.shape() {
                return Err(Error::format(
                    "checkpoint",
                    format!("tensor {} has unexpected name or shape {:?}", entry.name, entry.shape),
                ));
            }
            let mut data = Vec::with_capacity(t.len());
            for _ in 0..t.len() {
                r.read_exact(&mut buf)
                    .map_err(|_| Error::format("checkpoint", "truncated tensor data"))?;
                data.push(f64::from_le_bytes(buf));
            }
            *t = Tensor::from_vec(&entry.shape, data)?;
        }
        if r.read(&mut buf).map_err(|e| Error::format("checkpoint", e.to_string()))? != 0 {
            return Err(Error::format("checkpoint", "trailing bytes after tensor data"));
        }
        Ok(Checkpoint {
            model: ModelState {
                params,
                vocab_size: header.vocab_size,
                hidden: header.hidden,
                dropout: header.dropout,
                seed: header.seed,
            },
            vocab,
            window: header.window,
            max_tokens: header.max_tokens,
            learning_rate: header.learning_rate,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_reader(f)
    }
}

fn vocab_json(tokens: &[String]) -> Result<String> {
    let map: serde_json::Map<String, serde_json::Value> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i.into()))
        .collect();
    Ok(serde_json::json!({
        "version": 1,
        "sos": crate::preprocess::SOS_TOKEN,
        "eot": crate::preprocess::EOT_TOKEN,
        "token_to_id": map,
    })
    .to_string())
}
