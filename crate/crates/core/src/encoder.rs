//! Aspect-aware sentence representation: a bias-free bidirectional GRU over
//! `[word ; aspect]` inputs followed by max-over-time pooling.

use crate::autodiff::{NodeId, ParamId, ParamStore, Scalar, Tape};
use crate::model::ModelError;

/// Weights of one GRU cell. There are no bias vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    /// Candidate input weights, `[hidden, input]`.
    pub w_x: ParamId,
    /// Candidate recurrent weights, `[hidden, hidden]`.
    pub w_h: ParamId,
    pub w_xr: ParamId,
    pub w_hr: ParamId,
    pub w_xz: ParamId,
    pub w_hz: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    /// Registers the six matrices as `{prefix}.w_x`, `{prefix}.w_h`, ...
    pub fn register<T: Scalar>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
        init: &mut impl FnMut(usize) -> Vec<T>,
    ) -> Self {
        let mut add = |name: &str, cols: usize| store.add(format!("{prefix}.{name}"), vec![hidden, cols], init(hidden * cols));
        let w_x = add("w_x", input);
        let w_h = add("w_h", hidden);
        let w_xr = add("w_xr", input);
        let w_hr = add("w_hr", hidden);
        let w_xz = add("w_xz", input);
        let w_hz = add("w_hz", hidden);
        Self { w_x, w_h, w_xr, w_hr, w_xz, w_hz, input, hidden }
    }

    /// One recurrence step:
    /// `r = σ(W_xr x + W_hr h)`, `z = σ(W_xz x + W_hz h)`,
    /// `h̃ = tanh(W_x x + r ⊙ (W_h h))`, `h' = (1 - z) ⊙ h + z ⊙ h̃`.
    pub fn step<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: NodeId, h_prev: NodeId) -> Result<NodeId, ModelError> {
        let (w_x, w_h) = (tape.param(self.w_x), tape.param(self.w_h));
        let (w_xr, w_hr) = (tape.param(self.w_xr), tape.param(self.w_hr));
        let (w_xz, w_hz) = (tape.param(self.w_xz), tape.param(self.w_hz));

        let xr = tape.matvec(w_xr, x)?;
        let hr = tape.matvec(w_hr, h_prev)?;
        let r_pre = tape.add(xr, hr)?;
        let r = tape.sigmoid(r_pre)?;

        let xz = tape.matvec(w_xz, x)?;
        let hz = tape.matvec(w_hz, h_prev)?;
        let z_pre = tape.add(xz, hz)?;
        let z = tape.sigmoid(z_pre)?;

        let xh = tape.matvec(w_x, x)?;
        let hh = tape.matvec(w_h, h_prev)?;
        let gated = tape.mul(r, hh)?;
        let cand_pre = tape.add(xh, gated)?;
        let cand = tape.tanh(cand_pre)?;

        let keep = tape.one_minus(z)?;
        let kept = tape.mul(keep, h_prev)?;
        let update = tape.mul(z, cand)?;
        Ok(tape.add(kept, update)?)
    }

    /// Hidden states for `inputs` in order, starting from the zero state.
    pub fn run<T: Scalar>(&self, tape: &mut Tape<'_, T>, inputs: &[NodeId]) -> Result<Vec<NodeId>, ModelError> {
        let mut h = tape.zeros(self.hidden);
        let mut states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            h = self.step(tape, x, h)?;
            states.push(h);
        }
        Ok(states)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AasrEncoder {
    pub forward: GruCell,
    pub backward: GruCell,
    pub hidden: usize,
}

impl AasrEncoder {
    pub fn register<T: Scalar>(
        store: &mut ParamStore<T>,
        prefix: &str,
        embed: usize,
        hidden: usize,
        init: &mut impl FnMut(usize) -> Vec<T>,
    ) -> Self {
        let forward = GruCell::register(store, &format!("{prefix}.fwd"), 2 * embed, hidden, init);
        let backward = GruCell::register(store, &format!("{prefix}.bwd"), 2 * embed, hidden, init);
        Self { forward, backward, hidden }
    }

    /// Concatenated `[→h_i ; ←h_i]` for every position `i`.
    pub fn hidden_states<T: Scalar>(
        &self,
        tape: &mut Tape<'_, T>,
        words: &[NodeId],
        aspect: NodeId,
    ) -> Result<Vec<NodeId>, ModelError> {
        if words.is_empty() {
            return Err(ModelError::EmptySentence);
        }
        let inputs = words.iter().map(|&w| tape.concat(&[w, aspect])).collect::<Result<Vec<_>, _>>()?;
        let fwd = self.forward.run(tape, &inputs)?;
        let reversed: Vec<NodeId> = inputs.iter().rev().copied().collect();
        let mut bwd = self.backward.run(tape, &reversed)?;
        bwd.reverse();
        fwd.iter().zip(&bwd).map(|(&f, &b)| Ok(tape.concat(&[f, b])?)).collect()
    }

    /// Max-pooled representation, `2 * hidden` long.
    pub fn represent<T: Scalar>(&self, tape: &mut Tape<'_, T>, words: &[NodeId], aspect: NodeId) -> Result<NodeId, ModelError> {
        let states = self.hidden_states(tape, words, aspect)?;
        Ok(tape.max_pool(&states)?)
    }
}

/// Mean of the embeddings of an aspect's tokens.
pub fn embed_aspect<T: Scalar>(tape: &mut Tape<'_, T>, token_embeddings: &[NodeId]) -> Result<NodeId, ModelError> {
    match token_embeddings {
        [] => Err(ModelError::EmptySentence),
        [single] => Ok(*single),
        many => {
            let w = 1.0 / many.len() as f64;
            Ok(tape.weighted_sum(many, &vec![w; many.len()])?)
        }
    }
}
