//! Full model: parameter layout, ablation variants, and per-sentence graphs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{AutodiffError, NodeId, ParamId, ParamStore, Scalar, Tape};
use crate::corpus::{AspectGroup, EmbeddingTable, Polarity, SentenceRecord, Vocabulary};
use crate::encoder::{embed_aspect, AasrEncoder, GruCell};
use crate::inter_aspect::{compute_gate_logits, fuse, normalize_gates, Classifier, GateParams, NUM_CLASSES};
use crate::losses::{focal_loss, neighbor_loss, total_objective, LossConfig};

pub const INIT_RANGE: f64 = 0.08;
const INIT_STREAM: u64 = 0x0001_1717;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] AutodiffError),
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("gating needs at least one neighbor")]
    NoNeighbors,
    #[error("{what}: expected {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("target index {index} out of range for {len} aspects")]
    TargetOutOfRange { index: usize, len: usize },
    #[error("aspect tokens {start}..{end} outside a sentence of {len} tokens")]
    AspectOutOfRange { start: usize, end: usize, len: usize },
    #[error("aspect {0} has no gold label")]
    MissingLabel(usize),
}

/// How neighbor representations enter the target representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    None,
    Temporal,
    Gated,
}

/// Which representations the gate softmax ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateReading {
    #[default]
    NeighborsOnly,
    /// Also gate the target representation itself as index 0.
    IncludeTarget,
}

impl fmt::Display for GateReading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateReading::NeighborsOnly => "neighbors",
            GateReading::IncludeTarget => "include-target",
        })
    }
}

impl FromStr for GateReading {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neighbors" | "neighbors-only" => Ok(GateReading::NeighborsOnly),
            "include-target" => Ok(GateReading::IncludeTarget),
            other => Err(format!("unknown gate reading `{other}` (expected neighbors or include-target)")),
        }
    }
}

/// The five ablation configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Gru,
    GruTm,
    GruNoTm,
    GruFl,
    Miad,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Gru, Variant::GruTm, Variant::GruNoTm, Variant::GruFl, Variant::Miad];

    pub fn fusion(self) -> Fusion {
        match self {
            Variant::Gru | Variant::GruFl => Fusion::None,
            Variant::GruTm => Fusion::Temporal,
            Variant::GruNoTm | Variant::Miad => Fusion::Gated,
        }
    }

    pub fn uses_focal_loss(self) -> bool {
        matches!(self, Variant::GruFl | Variant::Miad)
    }

    pub fn uses_neighbor_loss(self) -> bool {
        matches!(self, Variant::GruTm | Variant::GruNoTm | Variant::Miad)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Gru => "gru",
            Variant::GruTm => "gru-tm",
            Variant::GruNoTm => "gru-notm",
            Variant::GruFl => "gru-fl",
            Variant::Miad => "miad",
        }
    }

    /// Row label in reports.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Gru => "GRU",
            Variant::GruTm => "GRU+TM",
            Variant::GruNoTm => "GRU+NoTM",
            Variant::GruFl => "GRU+FL",
            Variant::Miad => "MIAD",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").to_ascii_lowercase().as_str() {
            "gru" => Ok(Variant::Gru),
            "gru-tm" => Ok(Variant::GruTm),
            "gru-notm" => Ok(Variant::GruNoTm),
            "gru-fl" => Ok(Variant::GruFl),
            "miad" | "gru-notm-fl" => Ok(Variant::Miad),
            other => Err(format!("unknown variant `{other}` (expected gru, gru-tm, gru-notm, gru-fl or miad)")),
        }
    }
}

/// Architecture switches used by the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardOptions {
    pub fusion: Fusion,
    pub gate_reading: GateReading,
}

impl From<Variant> for ForwardOptions {
    fn from(v: Variant) -> Self {
        Self { fusion: v.fusion(), gate_reading: GateReading::NeighborsOnly }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    /// Per-direction GRU size; representations are `2 * hidden` long.
    pub hidden: usize,
}

impl ModelDims {
    pub fn rep(&self) -> usize {
        2 * self.hidden
    }
}

/// Parameter handles. Blocks are registered in a fixed order so the layout
/// is a pure function of [`ModelDims`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelLayout {
    pub dims: ModelDims,
    pub embedding: ParamId,
    pub encoder: AasrEncoder,
    pub gates: GateParams,
    pub temporal: GruCell,
    pub classifier: Classifier,
}

impl ModelLayout {
    fn register<T: Scalar>(store: &mut ParamStore<T>, dims: ModelDims, embedding: Vec<T>, init: &mut impl FnMut(usize) -> Vec<T>) -> Self {
        let embedding = store.add("embedding", vec![dims.vocab, dims.embed], embedding);
        let encoder = AasrEncoder::register(store, "encoder", dims.embed, dims.hidden, init);
        let gates = GateParams::register(store, dims.embed, dims.rep(), init);
        let temporal = GruCell::register(store, "temporal", dims.rep(), dims.rep(), init);
        let classifier = Classifier::register(store, dims.rep(), init);
        Self { dims, embedding, encoder, gates, temporal, classifier }
    }

    /// Block names and shapes in registration order.
    pub fn expected_blocks(dims: ModelDims) -> Vec<(String, Vec<usize>)> {
        let mut store = ParamStore::<f32>::new();
        let emb = vec![0.0; dims.vocab * dims.embed];
        Self::register(&mut store, dims, emb, &mut |n| vec![0.0; n]);
        store.blocks().iter().map(|b| (b.name.clone(), b.shape.clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub store: ParamStore<T>,
    pub layout: ModelLayout,
}

impl<T: Scalar> ModelParams<T> {
    /// Uniform `[-0.08, 0.08]` weights from `seed`, zero classifier bias, and
    /// the given `[vocab, embed]` embedding matrix.
    pub fn init(dims: ModelDims, embedding: &[f32], seed: u64) -> Self {
        Self::init_with_range(dims, embedding, seed, INIT_RANGE)
    }

    pub fn init_with_range(dims: ModelDims, embedding: &[f32], seed: u64, range: f64) -> Self {
        assert_eq!(embedding.len(), dims.vocab * dims.embed, "embedding matrix does not match dims");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let mut init = |n: usize| (0..n).map(|_| T::of(rng.gen_range(-range..=range))).collect();
        let mut store = ParamStore::new();
        let emb = embedding.iter().map(|&v| T::of(v as f64)).collect();
        let layout = ModelLayout::register(&mut store, dims, emb, &mut init);
        Self { store, layout }
    }

    pub fn from_embeddings(table: &EmbeddingTable, hidden: usize, seed: u64) -> Self {
        let dims = ModelDims { vocab: table.vocab.len(), embed: table.dim, hidden };
        Self::init(dims, &table.matrix, seed)
    }

    /// Rebuilds handles over an existing store whose blocks follow the layout
    /// order for `dims`.
    pub fn from_store(store: ParamStore<T>, dims: ModelDims) -> Self {
        let mut probe = ParamStore::<T>::new();
        let layout = ModelLayout::register(&mut probe, dims, vec![T::zero(); dims.vocab * dims.embed], &mut |n| vec![T::zero(); n]);
        Self { store, layout }
    }

    pub fn dims(&self) -> ModelDims {
        self.layout.dims
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams { store: self.store.cast(), layout: self.layout }
    }
}

/// Vocabulary rows of a sentence and its aspect token ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub words: Vec<usize>,
    pub aspects: Vec<EncodedAspect>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedAspect {
    pub tok_start: usize,
    pub tok_len: usize,
    pub label: Option<Polarity>,
}

impl EncodedSentence {
    pub fn from_record(record: &SentenceRecord, vocab: &Vocabulary) -> Self {
        Self {
            words: record.tokens.iter().map(|t| vocab.row(t)).collect(),
            aspects: record
                .aspects
                .iter()
                .map(|a| EncodedAspect { tok_start: a.tok_start, tok_len: a.tok_len, label: Some(a.polarity) })
                .collect(),
        }
    }

    pub fn is_multi_aspect(&self) -> bool {
        self.aspects.len() > 1
    }

    pub fn labels(&self) -> Result<Vec<Polarity>, ModelError> {
        self.aspects.iter().enumerate().map(|(i, a)| a.label.ok_or(ModelError::MissingLabel(i))).collect()
    }
}

/// Shared per-sentence nodes: one aspect embedding, representation and
/// stand-alone prediction per aspect.
#[derive(Debug, Clone)]
pub struct SentenceGraph {
    pub aspect_embeddings: Vec<NodeId>,
    pub reps: Vec<NodeId>,
    /// `classify(C_k)` for each aspect; neighbor predictions come from here.
    pub own_probs: Vec<NodeId>,
    temporal_states: Option<Vec<NodeId>>,
}

pub fn encode_sentence<T: Scalar>(
    tape: &mut Tape<'_, T>,
    model: &ModelParams<T>,
    sentence: &EncodedSentence,
) -> Result<SentenceGraph, ModelError> {
    let layout = &model.layout;
    let n = sentence.words.len();
    if n == 0 {
        return Err(ModelError::EmptySentence);
    }
    let words = sentence.words.iter().map(|&r| tape.embed(layout.embedding, r)).collect::<Result<Vec<_>, _>>()?;
    let mut aspect_embeddings = Vec::with_capacity(sentence.aspects.len());
    let mut reps = Vec::with_capacity(sentence.aspects.len());
    let mut own_probs = Vec::with_capacity(sentence.aspects.len());
    for a in &sentence.aspects {
        let end = a.tok_start + a.tok_len;
        if a.tok_len == 0 || end > n {
            return Err(ModelError::AspectOutOfRange { start: a.tok_start, end, len: n });
        }
        let emb = embed_aspect(tape, &words[a.tok_start..end])?;
        let rep = layout.encoder.represent(tape, &words, emb)?;
        own_probs.push(layout.classifier.classify(tape, rep)?);
        aspect_embeddings.push(emb);
        reps.push(rep);
    }
    Ok(SentenceGraph { aspect_embeddings, reps, own_probs, temporal_states: None })
}

/// Fused representation `C_f` for aspect `target` under `opts`.
pub fn target_representation<T: Scalar>(
    tape: &mut Tape<'_, T>,
    model: &ModelParams<T>,
    opts: ForwardOptions,
    graph: &mut SentenceGraph,
    target: usize,
) -> Result<NodeId, ModelError> {
    let k = graph.reps.len();
    if target >= k {
        return Err(ModelError::TargetOutOfRange { index: target, len: k });
    }
    let ct = graph.reps[target];
    match opts.fusion {
        Fusion::None => Ok(ct),
        Fusion::Temporal => {
            if graph.temporal_states.is_none() {
                graph.temporal_states = Some(model.layout.temporal.run(tape, &graph.reps)?);
            }
            Ok(graph.temporal_states.as_ref().expect("just computed")[target])
        }
        Fusion::Gated => {
            let mut gated: Vec<NodeId> = Vec::with_capacity(k);
            if opts.gate_reading == GateReading::IncludeTarget {
                gated.push(ct);
            }
            gated.extend((0..k).filter(|&i| i != target).map(|i| graph.reps[i]));
            if gated.is_empty() {
                return Ok(ct);
            }
            let logits = compute_gate_logits(tape, &model.layout.gates, graph.aspect_embeddings[target], &gated)?;
            let gates = normalize_gates(tape, &logits)?;
            fuse(tape, ct, &gated, &gates)
        }
    }
}

/// Prediction for one aspect as target plus the stand-alone predictions of
/// its neighbors in textual order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupOutput {
    pub target: NodeId,
    pub neighbors: Vec<NodeId>,
}

pub fn forward_target<T: Scalar>(
    tape: &mut Tape<'_, T>,
    model: &ModelParams<T>,
    opts: ForwardOptions,
    graph: &mut SentenceGraph,
    target: usize,
) -> Result<GroupOutput, ModelError> {
    let target_probs = match opts.fusion {
        Fusion::None => {
            if target >= graph.own_probs.len() {
                return Err(ModelError::TargetOutOfRange { index: target, len: graph.own_probs.len() });
            }
            graph.own_probs[target]
        }
        _ => {
            let cf = target_representation(tape, model, opts, graph, target)?;
            model.layout.classifier.classify(tape, cf)?
        }
    };
    let neighbors = (0..graph.own_probs.len()).filter(|&i| i != target).map(|i| graph.own_probs[i]).collect();
    Ok(GroupOutput { target: target_probs, neighbors })
}

/// Forward pass for a single aspect group.
pub fn forward_variant<T: Scalar>(
    tape: &mut Tape<'_, T>,
    model: &ModelParams<T>,
    opts: ForwardOptions,
    sentence: &EncodedSentence,
    target: usize,
) -> Result<GroupOutput, ModelError> {
    let mut graph = encode_sentence(tape, model, sentence)?;
    forward_target(tape, model, opts, &mut graph, target)
}

/// `Σ_t (L_FL(t) + λ L_NA(t))` over every aspect of the sentence as target.
pub fn sentence_objective<T: Scalar>(
    tape: &mut Tape<'_, T>,
    model: &ModelParams<T>,
    opts: ForwardOptions,
    loss: LossConfig,
    sentence: &EncodedSentence,
) -> Result<(NodeId, Vec<NodeId>), ModelError> {
    let labels = sentence.labels()?;
    let mut graph = encode_sentence(tape, model, sentence)?;
    let mut objectives = Vec::with_capacity(labels.len());
    let mut target_probs = Vec::with_capacity(labels.len());
    for t in 0..labels.len() {
        let out = forward_target(tape, model, opts, &mut graph, t)?;
        let l_fl = focal_loss(tape, out.target, labels[t], loss.gamma)?;
        let j = if loss.lambda == 0.0 {
            l_fl
        } else {
            let neighbor_labels: Vec<Polarity> = (0..labels.len()).filter(|&i| i != t).map(|i| labels[i]).collect();
            let l_na = neighbor_loss(tape, &out.neighbors, &neighbor_labels, loss.gamma)?;
            total_objective(tape, l_fl, l_na, loss.lambda)?
        };
        objectives.push(j);
        target_probs.push(out.target);
    }
    let total = tape.weighted_sum(&objectives, &vec![1.0; objectives.len()])?;
    Ok((total, target_probs))
}

/// Target probability vectors for every aspect of a sentence.
pub fn predict_sentence<T: Scalar>(
    model: &ModelParams<T>,
    opts: ForwardOptions,
    sentence: &EncodedSentence,
) -> Result<Vec<[T; NUM_CLASSES]>, ModelError> {
    let mut tape = Tape::new(&model.store);
    let mut graph = encode_sentence(&mut tape, model, sentence)?;
    (0..sentence.aspects.len())
        .map(|t| {
            let out = forward_target(&mut tape, model, opts, &mut graph, t)?;
            let p = tape.value(out.target);
            Ok([p[0], p[1], p[2]])
        })
        .collect()
}

/// Lowest class index wins ties.
pub fn argmax<T: Scalar>(p: &[T]) -> Polarity {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    Polarity::from_index(best).expect("three classes")
}

impl<'a> AspectGroup<'a> {
    pub fn encode(&self, vocab: &Vocabulary) -> (EncodedSentence, usize) {
        (EncodedSentence::from_record(self.sentence, vocab), self.target_index)
    }
}
