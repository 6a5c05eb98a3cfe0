//! Activity sanitization, vocabulary encoding, train/test splitting and
//! sliding-window training pair construction.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eventlog::EventLog;

pub const SOS_TOKEN: &str = "<SOS>";
pub const EOT_TOKEN: &str = "<EOT>";
pub const SOS: usize = 0;
pub const EOT: usize = 1;

/// Upper bound on traces per input or output window.
pub const MAX_WINDOW: usize = 50;

/// Keeps only ASCII alphanumeric characters of an activity label.
pub fn sanitize(activity: &str) -> Result<String> {
    let clean: String = activity.chars().filter(char::is_ascii_alphanumeric).collect();
    if clean.is_empty() {
        return Err(Error::EmptyActivity(activity.to_string()));
    }
    Ok(clean)
}

/// Sanitizes every label of an already-built log, keeping trace order.
pub fn sanitize_log(log: &EventLog) -> Result<EventLog> {
    let traces = log
        .traces()
        .iter()
        .map(|t| {
            let acts = t.activities.iter().map(|a| sanitize(a)).collect::<Result<_>>()?;
            Ok(crate::eventlog::Trace::new(t.case_id.clone(), acts))
        })
        .collect::<Result<_>>()?;
    Ok(EventLog::new(traces))
}

/// The first `n` traces of a canonically ordered log.
pub fn select_head(log: &EventLog, n: usize) -> EventLog {
    log.slice(0..n.min(log.len()))
}

/// Splits off the first `floor(fraction * T)` traces for training.
///
/// A tiny log can leave the training half empty; callers should treat that
/// as a degenerate setup.
pub fn split(log: &EventLog, train_fraction: f64) -> Result<(EventLog, EventLog)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let cut = (train_fraction * log.len() as f64).floor() as usize;
    Ok((log.slice(0..cut), log.slice(cut..log.len())))
}

/// Number of input (`p`) and output (`q`) traces per training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub input_traces: usize,
    pub output_traces: usize,
}

impl WindowSpec {
    pub fn new(input_traces: usize, output_traces: usize) -> Result<Self> {
        for (name, v) in [("input", input_traces), ("output", output_traces)] {
            if !(1..=MAX_WINDOW).contains(&v) {
                return Err(Error::Config(format!(
                    "{name} trace count must be within 1..={MAX_WINDOW}, got {v}"
                )));
            }
        }
        Ok(WindowSpec {
            input_traces,
            output_traces,
        })
    }

    pub fn span(&self) -> usize {
        self.input_traces + self.output_traces
    }
}

/// Dense integer encoding of activity labels plus the two sentinels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    sos: String,
    eot: String,
    token_to_id: BTreeMap<String, usize>,
}

const VOCAB_VERSION: u32 = 1;

impl Vocabulary {
    /// Sentinels only.
    pub fn empty() -> Self {
        let tokens = vec![SOS_TOKEN.to_string(), EOT_TOKEN.to_string()];
        let index = tokens.iter().cloned().zip(0..).collect();
        Vocabulary { tokens, index }
    }

    /// Assigns ids by first appearance in `train`, after the sentinels.
    pub fn build(train: &EventLog) -> Self {
        let mut vocab = Vocabulary::empty();
        for act in train.traces().iter().flat_map(|t| &t.activities) {
            vocab.insert(act);
        }
        vocab
    }

    fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn decode(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Activity tokens (everything but the sentinels).
    pub fn activities(&self) -> &[String] {
        &self.tokens[2..]
    }

    /// Encodes a trace followed by one EOT.
    pub fn encode_trace(&self, activities: &[String]) -> Result<Vec<usize>> {
        let mut ids = Vec::with_capacity(activities.len() + 1);
        for a in activities {
            match self.encode(a) {
                Some(id) if id > EOT => ids.push(id),
                _ => return Err(Error::UnknownActivity(a.clone())),
            }
        }
        ids.push(EOT);
        Ok(ids)
    }

    /// Splits a token stream on EOT. Trailing tokens without an EOT are dropped.
    pub fn decode_traces(&self, ids: &[usize]) -> Result<Vec<Vec<String>>> {
        let mut traces = Vec::new();
        let mut cur = Vec::new();
        for &id in ids {
            match id {
                EOT => traces.push(std::mem::take(&mut cur)),
                _ => cur.push(
                    self.decode(id)
                        .ok_or(Error::TokenOutOfRange {
                            id,
                            vocab_size: self.len(),
                        })?
                        .to_string(),
                ),
            }
        }
        Ok(traces)
    }

    /// Hex SHA-256 over the ordered token list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = VocabFile {
            version: VOCAB_VERSION,
            sos: SOS_TOKEN.into(),
            eot: EOT_TOKEN.into(),
            token_to_id: self.index.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(text)?;
        if file.version != VOCAB_VERSION {
            return Err(Error::format("vocabulary", format!("unsupported version {}", file.version)));
        }
        let n = file.token_to_id.len();
        let mut tokens = vec![None; n];
        for (tok, id) in file.token_to_id {
            match tokens.get_mut(id) {
                Some(slot @ None) => *slot = Some(tok),
                _ => return Err(Error::format("vocabulary", format!("ids are not a dense bijection (id {id})"))),
            }
        }
        let tokens: Vec<String> = tokens.into_iter().map(Option::unwrap).collect();
        if tokens.len() < 2 || tokens[SOS] != file.sos || tokens[EOT] != file.eot {
            return Err(Error::format("vocabulary", "sentinels must hold ids 0 and 1"));
        }
        let index = tokens.iter().cloned().zip(0..).collect();
        Ok(Vocabulary { tokens, index })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Vocabulary::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// One `(X, Y)` example: `p` EOT-terminated traces in, `q` out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    /// Index of the first input trace in the source log.
    pub index: usize,
}

/// Builds all stride-1 windows: pair `k` reads traces `[k, k+p)` and
/// targets `[k+p, k+p+q)`.
pub fn make_pairs(log: &EventLog, spec: WindowSpec, vocab: &Vocabulary) -> Result<Vec<TrainingPair>> {
    let total = log.len();
    if total < spec.span() {
        return Err(Error::InsufficientTraces {
            required: spec.span(),
            available: total,
        });
    }
    let encoded = log
        .traces()
        .iter()
        .map(|t| vocab.encode_trace(&t.activities))
        .collect::<Result<Vec<_>>>()?;
    let (p, q) = (spec.input_traces, spec.output_traces);
    Ok((0..=total - p - q)
        .map(|k| TrainingPair {
            x: encoded[k..k + p].concat(),
            y: encoded[k + p..k + p + q].concat(),
            index: k,
        })
        .collect())
}

#[derive(Serialize, Deserialize, Debug)]
struct PairsHeader {
    format: String,
    version: u32,
    input_traces: usize,
    output_traces: usize,
    count: usize,
    vocab_hash: String,
}

const PAIRS_FORMAT: &str = "logcast-pairs";

/// Writes pairs as a JSON header line followed by little-endian `u32`
/// records `index, |x|, x.., |y|, y..`.
pub fn write_pairs(
    path: impl AsRef<Path>,
    pairs: &[TrainingPair],
    spec: WindowSpec,
    vocab: &Vocabulary,
) -> Result<()> {
    let path = path.as_ref();
    let header = PairsHeader {
        format: PAIRS_FORMAT.into(),
        version: 1,
        input_traces: spec.input_traces,
        output_traces: spec.output_traces,
        count: pairs.len(),
        vocab_hash: vocab.fingerprint(),
    };
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    let mut put = |v: usize| buf.extend_from_slice(&(v as u32).to_le_bytes());
    for pair in pairs {
        put(pair.index);
        put(pair.x.len());
        pair.x.iter().for_each(|&t| put(t));
        put(pair.y.len());
        pair.y.iter().for_each(|&t| put(t));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Reads a pairs file, checking it was encoded with `vocab`.
pub fn read_pairs(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<(WindowSpec, Vec<TrainingPair>)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: PairsHeader = serde_json::from_str(line.trim_end())?;
    if header.format != PAIRS_FORMAT || header.version != 1 {
        return Err(Error::format("pairs file", "unrecognized header"));
    }
    if header.vocab_hash != vocab.fingerprint() {
        return Err(Error::format("pairs file", "encoded with a different vocabulary"));
    }
    let spec = WindowSpec::new(header.input_traces, header.output_traces)?;
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;
    let mut words = body.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize);
    let truncated = || Error::format("pairs file", "truncated body");
    let take_seq = |words: &mut dyn Iterator<Item = usize>| -> Result<Vec<usize>> {
        let n = words.next().ok_or_else(truncated)?;
        let seq: Vec<usize> = words.take(n).collect();
        if seq.len() != n {
            return Err(truncated());
        }
        if let Some(&id) = seq.iter().find(|&&id| id >= vocab.len()) {
            return Err(Error::TokenOutOfRange {
                id,
                vocab_size: vocab.len(),
            });
        }
        Ok(seq)
    };
    let mut pairs = Vec::with_capacity(header.count);
    for _ in 0..header.count {
        let index = words.next().ok_or_else(truncated)?;
        let x = take_seq(&mut words)?;
        let y = take_seq(&mut words)?;
        pairs.push(TrainingPair { x, y, index });
    }
    Ok((spec, pairs))
}
