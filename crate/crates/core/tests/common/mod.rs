#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;

use miad_core::autodiff::{AutodiffError, NodeId, Tape};
use miad_core::encoder::embed_aspect;
use miad_core::corpus::{parse_semeval_xml, Polarity, SentenceRecord, Split, Vocabulary};
use miad_core::losses::LossConfig;
use miad_core::model::{sentence_objective, EncodedAspect, EncodedSentence, ForwardOptions, ModelDims, ModelError, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

pub fn mini_records() -> Vec<SentenceRecord> {
    parse_semeval_xml(&fixture_path("restaurant_mini.xml"), Split::Train).unwrap().records
}

/// GloVe-style text file with seeded random vectors for every token of
/// `records` except the listed ones.
pub fn write_embedding_file(records: &[SentenceRecord], dim: usize, seed: u64, skip: &[&str]) -> tempfile::NamedTempFile {
    let vocab = Vocabulary::from_records(records);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for tok in &vocab.tokens()[2..] {
        if skip.contains(&tok.as_str()) {
            continue;
        }
        write!(f, "{tok}").unwrap();
        for _ in 0..dim {
            write!(f, " {:.5}", rng.gen_range(-0.5f32..0.5)).unwrap();
        }
        writeln!(f).unwrap();
    }
    f.flush().unwrap();
    f
}

/// Toy model with embedding dim `embed`, hidden `hidden`, and weights drawn
/// uniformly from `[-range, range]`.
pub fn toy_model(vocab: usize, embed: usize, hidden: usize, seed: u64, range: f64) -> ModelParams<f64> {
    let dims = ModelDims { vocab, embed, hidden };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let emb: Vec<f32> = (0..vocab * embed).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    ModelParams::init_with_range(dims, &emb, seed, range)
}

// The forward pass reads parameter values only through the tape, so the
// closure works on whatever store the tape was bound to.

/// Five-token sentence with `k` one- or two-token aspects.
pub fn toy_sentence(vocab: usize, k: usize, seed: u64) -> EncodedSentence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = (0..5).map(|_| rng.gen_range(2..vocab)).collect();
    let spans: &[(usize, usize)] = match k {
        1 => &[(1, 2)],
        2 => &[(0, 1), (3, 2)],
        _ => &[(0, 1), (2, 1), (3, 2)],
    };
    let aspects = spans
        .iter()
        .map(|&(s, l)| EncodedAspect { tok_start: s, tok_len: l, label: Polarity::from_index(rng.gen_range(0..3)) })
        .collect();
    EncodedSentence { words, aspects }
}

pub fn graph_only(e: ModelError) -> AutodiffError {
    match e {
        ModelError::Graph(g) => g,
        other => panic!("model error in gradient check: {other}"),
    }
}

pub fn objective_fn<'a>(
    model: &'a ModelParams<f64>,
    opts: ForwardOptions,
    loss: LossConfig,
    sentence: &'a EncodedSentence,
) -> impl Fn(&mut Tape<'_, f64>) -> Result<NodeId, AutodiffError> + 'a {
    move |tape| {
        sentence_objective(tape, model, opts, loss, sentence).map(|(j, _)| j).map_err(graph_only)
    }
}

/// Smallest gap between the two largest encoder states of any pooled
/// feature, over every aspect of `sentence`.
pub fn pool_margin(model: &ModelParams<f64>, sentence: &EncodedSentence) -> f64 {
    let mut tape = Tape::new(&model.store);
    let words: Vec<_> = sentence.words.iter().map(|&r| tape.embed(model.layout.embedding, r).unwrap()).collect();
    let mut margin = f64::INFINITY;
    for a in &sentence.aspects {
        let e = embed_aspect(&mut tape, &words[a.tok_start..a.tok_start + a.tok_len]).unwrap();
        let hs = model.layout.encoder.hidden_states(&mut tape, &words, e).unwrap();
        for j in 0..model.dims().rep() {
            let mut col: Vec<f64> = hs.iter().map(|&h| tape.value(h)[j]).collect();
            col.sort_by(|x, y| y.total_cmp(x));
            margin = margin.min(col[0] - col[1]);
        }
    }
    margin
}

/// Toy sentence whose max-pool winners all lead by at least `min_gap`, so a
/// finite-difference probe does not cross a pooling kink.
pub fn smooth_toy_sentence(model: &ModelParams<f64>, k: usize, seed: u64, min_gap: f64) -> EncodedSentence {
    (0..)
        .map(|i| toy_sentence(model.dims().vocab, k, seed.wrapping_add(i * 0x9e37)))
        .find(|s| pool_margin(model, s) >= min_gap)
        .unwrap()
}
