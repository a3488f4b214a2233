use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, SentenceRecord};

pub const EMBEDDING_DIM: usize = 300;
/// Reserved all-zero padding row.
pub const PAD: usize = 0;
/// Reserved row for tokens first seen at prediction time.
pub const UNK: usize = 1;

const OOV_RANGE: f32 = 0.1;
const OOV_STREAM: u64 = 0x00e3_b0c4;

/// Token to row mapping. Rows 0 and 1 are `<pad>` and `<unk>`; corpus tokens
/// follow in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Self { tokens: Vec::new(), index: HashMap::new() };
        v.insert("<pad>");
        v.insert("<unk>");
        v
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a SentenceRecord>) -> Self {
        let mut v = Self::new();
        for r in records {
            for t in &r.tokens {
                v.insert(t);
            }
        }
        v
    }

    /// Rebuilds a vocabulary from its row-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Total lookup: unknown tokens map to [`UNK`].
    pub fn row(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmbeddingStats {
    /// Corpus tokens (reserved rows excluded).
    pub corpus_tokens: usize,
    pub found: usize,
    pub oov: usize,
    /// Lines without exactly `1 + dim` fields.
    pub bad_lines: usize,
}

impl EmbeddingStats {
    pub fn oov_rate(&self) -> f64 {
        if self.corpus_tokens == 0 {
            0.0
        } else {
            self.oov as f64 / self.corpus_tokens as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocabulary,
    pub dim: usize,
    /// Row-major `[vocab.len(), dim]`.
    pub matrix: Vec<f32>,
    /// `true` for rows initialized randomly instead of from the file.
    pub oov: Vec<bool>,
    pub stats: EmbeddingStats,
}

impl EmbeddingTable {
    pub fn row(&self, r: usize) -> &[f32] {
        &self.matrix[r * self.dim..(r + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> &[f32] {
        self.row(self.vocab.row(token))
    }

    /// Random table over a vocabulary, as if no token were found in any
    /// embedding file. Useful for toy models with a small `dim`.
    pub fn random(vocab: Vocabulary, dim: usize, seed: u64) -> Self {
        let n = vocab.len();
        let mut matrix = vec![0.0; n * dim];
        let mut rng = oov_rng(seed);
        for r in 0..n {
            if r != PAD {
                fill_uniform(&mut rng, &mut matrix[r * dim..(r + 1) * dim]);
            }
        }
        let mut oov = vec![true; n];
        oov[PAD] = false;
        let corpus_tokens = n.saturating_sub(2);
        Self { vocab, dim, matrix, oov, stats: EmbeddingStats { corpus_tokens, found: 0, oov: corpus_tokens, bad_lines: 0 } }
    }
}

fn oov_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(OOV_STREAM);
    rng
}

fn fill_uniform(rng: &mut ChaCha8Rng, row: &mut [f32]) {
    for v in row {
        *v = rng.gen_range(-OOV_RANGE..=OOV_RANGE);
    }
}

/// Builds the vocabulary over `records` and fills rows from a whitespace
/// separated `token v1 .. v300` file. An exact token match wins over a
/// case-insensitive one. Missing tokens (and `<unk>`) get uniform
/// `[-0.1, 0.1]` entries drawn in row order from `seed`; `<pad>` stays zero.
pub fn build_embeddings<'a>(
    records: impl IntoIterator<Item = &'a SentenceRecord>,
    path: &Path,
    seed: u64,
) -> Result<EmbeddingTable, CorpusError> {
    let vocab = Vocabulary::from_records(records);
    if vocab.len() <= 2 {
        return Err(CorpusError::EmptyVocabulary);
    }
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io_err)?;
    let dim = EMBEDDING_DIM;
    let n = vocab.len();
    let mut matrix = vec![0.0f32; n * dim];
    let mut exact = vec![false; n];
    let mut filled = vec![false; n];
    let mut bad_lines = 0;

    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut buf = Vec::new();
    let mut values = Vec::with_capacity(dim);
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf).map_err(io_err)? == 0 {
            break;
        }
        let line = String::from_utf8_lossy(&buf);
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if rest.len() != dim {
            bad_lines += 1;
            continue;
        }
        let row = match vocab.get(word) {
            Some(r) if !exact[r] => Some((r, true)),
            Some(_) => None,
            None => vocab.get(&word.to_lowercase()).filter(|&r| !filled[r]).map(|r| (r, false)),
        };
        let Some((r, is_exact)) = row else { continue };
        if r < 2 {
            continue;
        }
        values.clear();
        for f in &rest {
            match f.parse::<f32>() {
                Ok(v) => values.push(v),
                Err(_) => break,
            }
        }
        if values.len() != dim {
            bad_lines += 1;
            continue;
        }
        matrix[r * dim..(r + 1) * dim].copy_from_slice(&values);
        filled[r] = true;
        exact[r] |= is_exact;
    }

    let mut rng = oov_rng(seed);
    let mut oov = vec![false; n];
    for r in UNK..n {
        if !filled[r] {
            fill_uniform(&mut rng, &mut matrix[r * dim..(r + 1) * dim]);
            oov[r] = true;
        }
    }
    let corpus_tokens = n - 2;
    let found = filled[2..].iter().filter(|&&f| f).count();
    Ok(EmbeddingTable {
        vocab,
        dim,
        matrix,
        oov,
        stats: EmbeddingStats { corpus_tokens, found, oov: corpus_tokens - found, bad_lines },
    })
}
