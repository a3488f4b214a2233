use thiserror::Error;

use super::{AutodiffError, NodeId, ParamStore, Tape};

/// Worst relative error found in one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// A perturbed evaluation produced a non-finite loss.
    pub non_finite: bool,
}

impl BlockReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        !self.non_finite && self.max_rel_error < tolerance
    }
}

/// Central difference formula used for the numeric derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`.
    TwoPoint,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`.
    #[default]
    FourPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub step: f64,
    pub stencil: Stencil,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passes(self.tolerance))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failing(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|b| !b.passes(self.tolerance))
    }
}

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error("finite-difference step {0} must lie in (0, 1e-3]")]
    Step(f64),
    #[error("loss graph construction failed: {0}")]
    Graph(#[from] AutodiffError),
    #[error("loss at the unperturbed point is not finite")]
    NonFiniteBase,
}

/// Compares backward against central differences for every entry of every
/// block in `params`, using the fourth-order stencil.
///
/// `loss_fn` builds the scalar loss on a fresh tape bound to the (possibly
/// perturbed) store. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(
    params: &ParamStore<f64>,
    step: f64,
    tolerance: f64,
    loss_fn: F,
) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&mut Tape<'_, f64>) -> Result<NodeId, AutodiffError>,
{
    grad_check_with(params, step, tolerance, Stencil::default(), loss_fn)
}

pub fn grad_check_with<F>(
    params: &ParamStore<f64>,
    step: f64,
    tolerance: f64,
    stencil: Stencil,
    loss_fn: F,
) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&mut Tape<'_, f64>) -> Result<NodeId, AutodiffError>,
{
    if !(step > 0.0 && step <= 1e-3) {
        return Err(GradCheckError::Step(step));
    }
    let analytic = {
        let mut tape = Tape::new(params);
        let out = loss_fn(&mut tape)?;
        if !tape.scalar(out).is_finite() {
            return Err(GradCheckError::NonFiniteBase);
        }
        tape.backward(out)?
    };

    let eval = |store: &ParamStore<f64>| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new(store);
        let out = loss_fn(&mut tape)?;
        Ok(tape.scalar(out))
    };

    let mut probe = params.clone();
    let mut blocks = Vec::with_capacity(params.len());
    for id in params.ids() {
        let exact = analytic.dense(id);
        let mut report = BlockReport {
            name: params.block(id).name.clone(),
            entries: exact.len(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            non_finite: false,
        };
        for (k, &a) in exact.iter().enumerate() {
            let original = probe.values(id)[k];
            let mut eval_at = |o: f64| -> Result<f64, AutodiffError> {
                probe.values_mut(id)[k] = original + o * step;
                eval(&probe)
            };
            // symmetric pairs are differenced first so an unused entry gives exactly 0
            let samples = match stencil {
                Stencil::TwoPoint => {
                    let (p1, m1) = (eval_at(1.0)?, eval_at(-1.0)?);
                    [p1, m1, (p1 - m1) / 2.0]
                }
                Stencil::FourPoint => {
                    let (p2, p1, m1, m2) = (eval_at(2.0)?, eval_at(1.0)?, eval_at(-1.0)?, eval_at(-2.0)?);
                    [p2 + p1, m1 + m2, (8.0 * (p1 - m1) - (p2 - m2)) / 12.0]
                }
            };
            probe.values_mut(id)[k] = original;
            let finite = samples.iter().all(|f| f.is_finite());

            if !finite {
                report.non_finite = true;
                report.worst_index = k;
                report.max_rel_error = f64::INFINITY;
                break;
            }
            let n = samples[2] / step;
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_index = k;
                report.analytic = a;
                report.numeric = n;
            }
        }
        blocks.push(report);
    }
    Ok(GradCheckReport { tolerance, step, stencil, blocks })
}
