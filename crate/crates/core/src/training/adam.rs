use crate::autodiff::{ParamStore, Scalar};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteGradient {
    pub block: usize,
    pub index: usize,
}

/// Bias-corrected Adam with per-block moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<P: Scalar>(store: &ParamStore<P>, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = store.blocks().iter().map(|b| vec![T::zero(); b.values.len()]).collect();
        Self { m: zeros.clone(), v: zeros, t: 0, lr, beta1: BETA1, beta2: BETA2, epsilon: EPSILON }
    }

    /// One update. A non-finite entry anywhere in `grads` aborts the step
    /// before anything is modified. `frozen` blocks keep their values and
    /// moments.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Vec<T>], frozen: &[bool]) -> Result<(), NonFiniteGradient> {
        assert_eq!(grads.len(), self.m.len(), "gradient blocks do not match optimizer state");
        for (block, g) in grads.iter().enumerate() {
            if let Some(index) = g.iter().position(|x| !x.is_finite()) {
                return Err(NonFiniteGradient { block, index });
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - self.beta1), T::of(1.0 - self.beta2));
        let c1 = T::of(1.0 - self.beta1.powi(t));
        let c2 = T::of(1.0 - self.beta2.powi(t));
        let lr = T::of(self.lr);
        let eps = T::of(self.epsilon);
        for (k, block) in store.blocks_mut().iter_mut().enumerate() {
            if frozen.get(k).copied().unwrap_or(false) {
                continue;
            }
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..g.len() {
                m[i] = b1 * m[i] + one_b1 * g[i];
                v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                block.values[i] = block.values[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
