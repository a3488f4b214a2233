//! Fusion of a target representation with its neighbors, and the shared
//! polarity classifier.
//!
//! The gated path computes one sigmoid gate per neighbor from the target
//! aspect embedding and that neighbor's representation, normalizes the gates
//! with a softmax across neighbors at every feature position, and adds the
//! gated neighbor representations to the target representation. The temporal
//! baseline instead runs a GRU over all representations in textual order.

use crate::autodiff::{NodeId, ParamId, ParamStore, Scalar, Tape};
use crate::encoder::GruCell;
use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateParams {
    /// `[g, embed]`, applied to the target aspect embedding.
    pub w_a: ParamId,
    /// `[g, g]`, applied to a neighbor representation.
    pub w_cg: ParamId,
}

impl GateParams {
    pub fn register<T: Scalar>(store: &mut ParamStore<T>, embed: usize, rep: usize, init: &mut impl FnMut(usize) -> Vec<T>) -> Self {
        let w_a = store.add("gate.w_a", vec![rep, embed], init(rep * embed));
        let w_cg = store.add("gate.w_cg", vec![rep, rep], init(rep * rep));
        Self { w_a, w_cg }
    }
}

/// `σ(W_a a + W_cg C_i)` for every neighbor `C_i`.
pub fn compute_gate_logits<T: Scalar>(
    tape: &mut Tape<'_, T>,
    gates: &GateParams,
    target_aspect: NodeId,
    neighbors: &[NodeId],
) -> Result<Vec<NodeId>, ModelError> {
    if neighbors.is_empty() {
        return Err(ModelError::NoNeighbors);
    }
    let w_a = tape.param(gates.w_a);
    let w_cg = tape.param(gates.w_cg);
    let from_aspect = tape.matvec(w_a, target_aspect)?;
    neighbors
        .iter()
        .map(|&c| {
            let from_rep = tape.matvec(w_cg, c)?;
            let pre = tape.add(from_aspect, from_rep)?;
            Ok(tape.sigmoid(pre)?)
        })
        .collect()
}

/// Softmax across the gates at each element position.
pub fn normalize_gates<T: Scalar>(tape: &mut Tape<'_, T>, logits: &[NodeId]) -> Result<Vec<NodeId>, ModelError> {
    if logits.is_empty() {
        return Err(ModelError::NoNeighbors);
    }
    let stacked = tape.softmax_across(logits)?;
    (0..logits.len()).map(|i| Ok(tape.row(stacked, i)?)).collect()
}

/// `C_f = C_t + Σ_i g_i ⊙ C_i`; with no neighbors `C_f = C_t`.
pub fn fuse<T: Scalar>(tape: &mut Tape<'_, T>, target: NodeId, neighbors: &[NodeId], gates: &[NodeId]) -> Result<NodeId, ModelError> {
    if neighbors.len() != gates.len() {
        return Err(ModelError::LengthMismatch { what: "gates", expected: neighbors.len(), got: gates.len() });
    }
    if neighbors.is_empty() {
        return Ok(target);
    }
    let products = neighbors.iter().zip(gates).map(|(&c, &g)| tape.mul(g, c)).collect::<Result<Vec<_>, _>>()?;
    let gated = tape.weighted_sum(&products, &vec![1.0; products.len()])?;
    Ok(tape.add(target, gated)?)
}

/// Temporal baseline: hidden state at `target_position` of a GRU run over the
/// representations in textual order.
pub fn temporal_fuse<T: Scalar>(
    tape: &mut Tape<'_, T>,
    cell: &GruCell,
    reps_in_text_order: &[NodeId],
    target_position: usize,
) -> Result<NodeId, ModelError> {
    if reps_in_text_order.is_empty() {
        return Err(ModelError::EmptySentence);
    }
    if target_position >= reps_in_text_order.len() {
        return Err(ModelError::TargetOutOfRange { index: target_position, len: reps_in_text_order.len() });
    }
    let states = cell.run(tape, &reps_in_text_order[..=target_position])?;
    Ok(states[target_position])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classifier {
    /// `[3, rep]`.
    pub w_out: ParamId,
    pub b_out: ParamId,
}

pub const NUM_CLASSES: usize = 3;

impl Classifier {
    pub fn register<T: Scalar>(store: &mut ParamStore<T>, rep: usize, init: &mut impl FnMut(usize) -> Vec<T>) -> Self {
        let w_out = store.add("classifier.w_out", vec![NUM_CLASSES, rep], init(NUM_CLASSES * rep));
        let b_out = store.add("classifier.b_out", vec![NUM_CLASSES], vec![T::zero(); NUM_CLASSES]);
        Self { w_out, b_out }
    }

    /// `softmax(W_out c + b_out)`.
    pub fn classify<T: Scalar>(&self, tape: &mut Tape<'_, T>, rep: NodeId) -> Result<NodeId, ModelError> {
        let w = tape.param(self.w_out);
        let b = tape.param(self.b_out);
        let logits = tape.matvec(w, rep)?;
        let shifted = tape.add(logits, b)?;
        Ok(tape.softmax(shifted)?)
    }
}
