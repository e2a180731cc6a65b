//! Model checkpoints.
//!
//! Layout: the magic bytes `RWNMT`, a little-endian `u32` format version, a
//! little-endian `u64` byte length followed by a JSON header (model config,
//! both lexicons, tensor names and sizes), then every tensor as
//! little-endian `f64` in header order. Floats are stored bit for bit.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::lexicon::Lexicon;
use super::params::ModelParams;
use super::train::Model;
use crate::error::{Error, Result};
use crate::io;

const MAGIC: &[u8; 5] = b"RWNMT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    src_lex: Lexicon,
    tgt_lex: Lexicon,
    tensors: Vec<(String, usize)>,
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let header = Header {
        config: model.params.config,
        src_lex: model.src_lex.clone(),
        tgt_lex: model.tgt_lex.clone(),
        tensors: model.params.tensor_sizes(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = Vec::with_capacity(json.len() + 8 * model.params.param_count() + 17);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in model.params.tensors() {
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Model> {
    let bad = |msg: &str| Error::format(origin, 0, msg.to_owned());
    let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| bad("not a model checkpoint"))?;
    let (version, rest) = split_array::<4>(rest).ok_or_else(|| bad("truncated header"))?;
    let version = u32::from_le_bytes(version);
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let (len, rest) = split_array::<8>(rest).ok_or_else(|| bad("truncated header"))?;
    let len = usize::try_from(u64::from_le_bytes(len)).map_err(|_| bad("header too large"))?;
    if rest.len() < len {
        return Err(bad("truncated header"));
    }
    let (json, mut data) = rest.split_at(len);
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(&format!("bad header: {e}")))?;
    if header.src_lex.len() != header.config.src_vocab || header.tgt_lex.len() != header.config.tgt_vocab {
        return Err(bad("lexicon sizes disagree with the model config"));
    }

    let mut params = ModelParams::init(header.config, 0.0, &mut ChaCha8Rng::seed_from_u64(0))?;
    if params.tensor_sizes() != header.tensors {
        return Err(bad("tensor layout does not match the model config"));
    }
    for (_, t) in params.tensors_mut() {
        for x in t.iter_mut() {
            let (raw, tail) = split_array::<8>(data).ok_or_else(|| bad("truncated tensor data"))?;
            *x = f64::from_le_bytes(raw);
            data = tail;
        }
    }
    if !data.is_empty() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok(Model {
        params,
        src_lex: header.src_lex,
        tgt_lex: header.tgt_lex,
    })
}

fn split_array<const N: usize>(bytes: &[u8]) -> Option<([u8; N], &[u8])> {
    if bytes.len() < N {
        return None;
    }
    let (head, tail) = bytes.split_at(N);
    Some((head.try_into().ok()?, tail))
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    io::write_atomic(path, &to_bytes(model)?)
}

pub fn load(path: &Path) -> Result<Model> {
    from_bytes(&io::read_bytes(path)?, path)
}
