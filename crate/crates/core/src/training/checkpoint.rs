//! Binary checkpoints: magic, format version, config text, vocabulary, and
//! named `f32` parameter blocks, all little-endian.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::config::{parse_config_text, ConfigError, TrainConfig};
use crate::atomic::write_atomic;
use crate::autodiff::ParamStore;
use crate::corpus::Vocabulary;
use crate::model::{ModelDims, ModelLayout, ModelParams};

pub const MAGIC: &[u8; 8] = b"MIADCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, this build reads version {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("truncated checkpoint: needed {needed} bytes at offset {offset}, file has {len}")]
    Truncated { offset: usize, needed: usize, len: usize },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint config: {0}")]
    Config(#[from] ConfigError),
    #[error("block `{block}`: checkpoint shape {found:?}, expected {expected:?}")]
    ShapeMismatch { block: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("block {index}: checkpoint has `{found}`, expected `{expected}`")]
    NameMismatch { index: usize, expected: String, found: String },
    #[error("checkpoint has {found} parameter blocks, expected {expected}")]
    BlockCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams<f32>,
}

pub fn encode_checkpoint(params: &ModelParams<f32>, config: &TrainConfig, vocab: &Vocabulary) -> Vec<u8> {
    let mut out = Vec::with_capacity(params.store.num_values() * 4 + 4096);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_str(&mut out, &config.to_text());
    put_u32(&mut out, vocab.len() as u32);
    for t in vocab.tokens() {
        put_str(&mut out, t);
    }
    put_u32(&mut out, params.store.len() as u32);
    for b in params.store.blocks() {
        put_str(&mut out, &b.name);
        put_u32(&mut out, b.shape.len() as u32);
        for &d in &b.shape {
            put_u64(&mut out, d as u64);
        }
        for v in &b.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(path: &Path, params: &ModelParams<f32>, config: &TrainConfig, vocab: &Vocabulary) -> Result<(), CheckpointError> {
    write_atomic(path, &encode_checkpoint(params, config, vocab)).map_err(|source| CheckpointError::Io { path: path.into(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.into(), source })?;
    decode_checkpoint(&bytes, None)
}

/// Like [`load_checkpoint`] but checks every block against the layout for
/// `dims`, failing on the first block that differs.
pub fn load_checkpoint_expecting(path: &Path, dims: ModelDims) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.into(), source })?;
    decode_checkpoint(&bytes, Some(dims))
}

pub fn decode_checkpoint(bytes: &[u8], expect: Option<ModelDims>) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let found = r.u32()?;
    if found != FORMAT_VERSION {
        return Err(CheckpointError::Version { found });
    }
    let config = TrainConfig::from_pairs(&parse_config_text(&r.string()?)?)?;
    let n_vocab = r.u32()? as usize;
    let mut tokens = Vec::with_capacity(n_vocab.min(1 << 20));
    for _ in 0..n_vocab {
        tokens.push(r.string()?);
    }
    let vocab = Vocabulary::from_tokens(tokens);

    let n_blocks = r.u32()? as usize;
    let mut store = ParamStore::<f32>::new();
    let mut raw = Vec::with_capacity(n_blocks.min(64));
    for _ in 0..n_blocks {
        let name = r.string()?;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| CheckpointError::Corrupt(format!("block `{name}` size overflows")))?;
        if shape.is_empty() || numel == 0 {
            return Err(CheckpointError::Corrupt(format!("block `{name}` has an empty shape")));
        }
        let data = r.take(numel.checked_mul(4).ok_or_else(|| CheckpointError::Corrupt("size overflow".into()))?)?;
        let values = data.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        raw.push((name, shape, values));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let dims = match expect {
        Some(d) => d,
        None => {
            let (_, shape, _) = raw.first().ok_or(CheckpointError::BlockCount { expected: 1, found: 0 })?;
            if shape.len() != 2 {
                return Err(CheckpointError::Corrupt("first block is not a 2-d embedding matrix".into()));
            }
            ModelDims { vocab: shape[0], embed: shape[1], hidden: config.hidden }
        }
    };
    let expected = ModelLayout::expected_blocks(dims);
    for (index, ((name, shape, _), (want_name, want_shape))) in raw.iter().zip(&expected).enumerate() {
        if name != want_name {
            return Err(CheckpointError::NameMismatch { index, expected: want_name.clone(), found: name.clone() });
        }
        if shape != want_shape {
            return Err(CheckpointError::ShapeMismatch { block: name.clone(), expected: want_shape.clone(), found: shape.clone() });
        }
    }
    if raw.len() != expected.len() {
        return Err(CheckpointError::BlockCount { expected: expected.len(), found: raw.len() });
    }
    if vocab.len() != dims.vocab {
        return Err(CheckpointError::Corrupt(format!("vocabulary has {} tokens, embedding has {} rows", vocab.len(), dims.vocab)));
    }
    for (name, shape, values) in raw {
        store.add(name, shape, values);
    }
    Ok(Checkpoint { config, vocab, params: ModelParams::from_store(store, dims) })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(CheckpointError::Truncated { offset: self.pos, needed: n, len: self.bytes.len() });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| CheckpointError::Corrupt("string is not UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Domain;
    use crate::model::Variant;

    fn fixture(hidden: usize) -> (ModelParams<f32>, TrainConfig, Vocabulary) {
        let vocab = Vocabulary::from_tokens(vec!["<pad>".into(), "<unk>".into(), "food".into(), "good".into()]);
        let dims = ModelDims { vocab: vocab.len(), embed: 5, hidden };
        let emb: Vec<f32> = (0..dims.vocab * dims.embed).map(|i| i as f32 * 0.25).collect();
        let mut cfg = TrainConfig::preset(Domain::Laptop, Variant::Miad);
        cfg.hidden = hidden;
        (ModelParams::init(dims, &emb, 9), cfg, vocab)
    }

    #[test]
    fn bytes_round_trip() {
        let (p, c, v) = fixture(3);
        let back = decode_checkpoint(&encode_checkpoint(&p, &c, &v), None).unwrap();
        assert_eq!(back.params, p);
        assert_eq!(back.config, c);
        assert_eq!(back.vocab, v);
    }

    #[test]
    fn every_truncation_fails() {
        let (p, c, v) = fixture(2);
        let bytes = encode_checkpoint(&p, &c, &v);
        for cut in [0, 4, 8, 11, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_checkpoint(&bytes[..cut], None).is_err(), "cut at {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_checkpoint(&long, None), Err(CheckpointError::Corrupt(_))));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let (p, c, v) = fixture(2);
        let mut bytes = encode_checkpoint(&p, &c, &v);
        bytes[8] = 7;
        assert!(matches!(decode_checkpoint(&bytes, None), Err(CheckpointError::Version { found: 7 })));
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(&bytes, None), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn expected_dims_mismatch_names_block() {
        let (p, c, v) = fixture(4);
        let bytes = encode_checkpoint(&p, &c, &v);
        let want = ModelDims { hidden: 2, ..p.dims() };
        match decode_checkpoint(&bytes, Some(want)) {
            Err(CheckpointError::ShapeMismatch { block, .. }) => assert_eq!(block, "encoder.fwd.w_x"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
