//! Single-file checkpoints:
//!
//! ```text
//! magic "S2ACKPT\0" | version u32 LE | header length u64 LE | header JSON
//! | every parameter block as f64 LE, row-major | SHA-256 of all preceding bytes
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ModelConfig, ModelParameters, Seq2Act, BLOCK_NAMES};
use crate::nn::Tensor;
use crate::vocab::{vocab_hash, ActionVocab, WordVocab};

pub const MAGIC: &[u8; 8] = b"S2ACKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint {what} mismatch: file has {found}, expected {expected}")]
    VersionMismatch {
        what: &'static str,
        found: String,
        expected: String,
    },
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    max_sequence_len: usize,
    words: WordVocab,
    actions: ActionVocab,
    vocab_hash: String,
    shapes: Vec<Vec<usize>>,
}

pub fn to_bytes(model: &Seq2Act) -> Vec<u8> {
    let header = Header {
        config: model.config.clone(),
        max_sequence_len: model.max_sequence_len,
        words: model.words.clone(),
        actions: model.actions.clone(),
        vocab_hash: vocab_hash(&model.words, &model.actions),
        shapes: model
            .params
            .blocks()
            .iter()
            .map(|b| b.shape().to_vec())
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(json.len() + 8 * model.params.count() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for b in model.params.blocks() {
        for v in b.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn corrupt(msg: &str) -> CheckpointError {
    CheckpointError::CorruptCheckpoint(msg.to_string())
}

pub fn from_bytes(bytes: &[u8]) -> Result<Seq2Act, CheckpointError> {
    if bytes.len() < MAGIC.len() + 4 + 8 + 32 {
        return Err(corrupt("file too short"));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            what: "format version",
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(corrupt("checksum mismatch"));
    }
    let hlen = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
    let header_end = 20usize
        .checked_add(hlen)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| corrupt("header overruns file"))?;
    let header: Header = serde_json::from_slice(&body[20..header_end])
        .map_err(|e| corrupt(&format!("header: {e}")))?;
    if vocab_hash(&header.words, &header.actions) != header.vocab_hash {
        return Err(corrupt("vocabulary hash does not match vocabularies"));
    }
    let expected = ModelParameters::shapes(
        &header.config,
        header.words.len(),
        header.actions.structures().len(),
        header.actions.semantics().len(),
        header.actions.outputs(),
    );
    if header.shapes != expected {
        return Err(corrupt("tensor shapes disagree with configuration"));
    }
    let mut at = header_end;
    let mut blocks = Vec::with_capacity(BLOCK_NAMES.len());
    for shape in &header.shapes {
        let n: usize = shape.iter().product();
        let end = at + 8 * n;
        if end > body.len() {
            return Err(corrupt("tensor data truncated"));
        }
        let data = body[at..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blocks.push(Tensor::from_vec(shape, data).map_err(|e| corrupt(&e.to_string()))?);
        at = end;
    }
    if at != body.len() {
        return Err(corrupt("trailing bytes after tensors"));
    }
    let params = ModelParameters::from_blocks(blocks).map_err(|e| corrupt(&e.to_string()))?;
    Ok(Seq2Act {
        config: header.config,
        words: header.words,
        actions: header.actions,
        params,
        max_sequence_len: header.max_sequence_len,
    })
}

pub fn save_checkpoint(model: &Seq2Act, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_bytes(model)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Seq2Act, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&bytes)
}

/// Loads and requires the vocabularies to hash to `expected_hash`.
pub fn load_expecting(path: &Path, expected_hash: &str) -> Result<Seq2Act, CheckpointError> {
    let model = load_checkpoint(path)?;
    let found = vocab_hash(&model.words, &model.actions);
    if found != expected_hash {
        return Err(CheckpointError::VersionMismatch {
            what: "vocabulary hash",
            found,
            expected: expected_hash.to_string(),
        });
    }
    Ok(model)
}
