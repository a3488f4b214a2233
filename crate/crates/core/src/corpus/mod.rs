//! SemEval-2014 aspect-term data: parsing, tokenization, vocabulary and
//! embedding construction, and per-aspect training instances.

mod embeddings;
mod groups;
mod stats;
mod tokenize;
mod xml;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

pub use embeddings::{build_embeddings, EmbeddingStats, EmbeddingTable, Vocabulary, EMBEDDING_DIM, PAD, UNK};
pub use groups::{make_aspect_groups, AspectGroup};
pub use stats::{dataset_stats, reference_counts, render_stats_csv, render_stats_table, ClassCounts, CountMismatch};
pub use tokenize::{align_span, tokenize, Token};
pub use xml::{parse_semeval_str, parse_semeval_xml, ParseWarnings, ParsedSplit};

/// Sentiment classes in their fixed index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Neutral = 0,
    Negative = 1,
    Positive = 2,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Neutral, Polarity::Negative, Polarity::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Neutral => "neutral",
            Polarity::Negative => "negative",
            Polarity::Positive => "positive",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Restaurant,
    Laptop,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Restaurant => "restaurant",
            Domain::Laptop => "laptop",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "restaurant" | "rest" | "restaurants" => Ok(Domain::Restaurant),
            "laptop" | "laptops" => Ok(Domain::Laptop),
            other => Err(format!("unknown domain `{other}` (expected restaurant or laptop)")),
        }
    }
}

/// One annotated aspect term. Token indices are 0-based: `tok_start` is the
/// first covered token and `tok_len >= 1` tokens are covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AspectSpan {
    pub term: String,
    pub char_start: usize,
    pub char_end: usize,
    pub tok_start: usize,
    pub tok_len: usize,
    pub polarity: Polarity,
}

impl AspectSpan {
    pub fn tok_range(&self) -> std::ops::Range<usize> {
        self.tok_start..self.tok_start + self.tok_len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceRecord {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    /// Sorted by `(char_start, char_end)`.
    pub aspects: Vec<AspectSpan>,
}

impl SentenceRecord {
    pub fn is_multi_aspect(&self) -> bool {
        self.aspects.len() > 1
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}:{line}:{column}: malformed XML: {message}")]
    Xml { origin: String, line: u32, column: u32, message: String },
    #[error("empty embedding vocabulary: no sentences given")]
    EmptyVocabulary,
}
