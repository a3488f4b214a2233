//! Focal loss on the target, averaged focal loss on the neighbors, and their
//! weighted sum.

use crate::autodiff::{NodeId, Scalar, Tape};
use crate::corpus::Polarity;
use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Focusing parameter; `0` is plain cross-entropy.
    pub gamma: f64,
    /// Weight of the neighbor loss.
    pub lambda: f64,
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        Ok(())
    }
}

/// `-(1 - p_y)^γ log p_y`.
pub fn focal_loss<T: Scalar>(tape: &mut Tape<'_, T>, probs: NodeId, label: Polarity, gamma: f64) -> Result<NodeId, ModelError> {
    Ok(tape.focal(probs, label.index(), gamma)?)
}

/// Mean focal loss over the neighbors; a constant zero when there are none.
pub fn neighbor_loss<T: Scalar>(
    tape: &mut Tape<'_, T>,
    neighbor_probs: &[NodeId],
    labels: &[Polarity],
    gamma: f64,
) -> Result<NodeId, ModelError> {
    if neighbor_probs.len() != labels.len() {
        return Err(ModelError::LengthMismatch { what: "neighbor labels", expected: neighbor_probs.len(), got: labels.len() });
    }
    if neighbor_probs.is_empty() {
        return Ok(tape.zeros(1));
    }
    let terms = neighbor_probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| focal_loss(tape, p, y, gamma))
        .collect::<Result<Vec<_>, _>>()?;
    let w = 1.0 / terms.len() as f64;
    Ok(tape.weighted_sum(&terms, &vec![w; terms.len()])?)
}

/// `L_FL + λ L_NA`.
pub fn total_objective<T: Scalar>(tape: &mut Tape<'_, T>, l_fl: NodeId, l_na: NodeId, lambda: f64) -> Result<NodeId, ModelError> {
    Ok(tape.weighted_sum(&[l_fl, l_na], &[1.0, lambda])?)
}
