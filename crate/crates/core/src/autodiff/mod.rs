//! Reverse-mode differentiation over a closed set of vector primitives.
//!
//! A [`Tape`] records every primitive application in creation order, which is
//! already a topological order of the graph. [`Tape::backward`] walks the
//! records once in reverse and accumulates parameter gradients into a
//! [`Gradients`] value; the tape itself is never mutated by backward, so a
//! forward-only tape can be reused for inference.
//!
//! Parameters are referenced by [`ParamId`] and read straight out of the
//! borrowed [`ParamStore`]; nothing is copied onto the tape.
//!
//! ```
//! use miad_core::autodiff::{ParamStore, Tape};
//!
//! let mut store = ParamStore::<f64>::new();
//! let w = store.add("w", vec![2, 3], vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.5]);
//! let mut tape = Tape::new(&store);
//! let wn = tape.param(w);
//! let x = tape.input(vec![3], vec![1.0, 2.0, 3.0]);
//! let logits = tape.matvec(wn, x).unwrap();
//! let probs = tape.softmax(logits).unwrap();
//! let loss = tape.focal(probs, 0, 0.0).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.dense(w).len(), 6);
//! ```

mod gradcheck;
mod params;

use std::fmt::Debug;

use num_traits::Float;
use thiserror::Error;

pub use gradcheck::{grad_check, grad_check_with, BlockReport, GradCheckError, GradCheckReport, Stencil};
pub use params::{zero_buffers, BlockGrad, Gradients, ParamBlock, ParamId, ParamStore};

/// Floating-point element type of a graph. Training runs in `f32`; gradient
/// checking runs in `f64`.
pub trait Scalar: Float + Send + Sync + Debug + Default + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Probabilities below this are clamped before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

/// The complete primitive catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// `W x` for `W` of shape `[rows, cols]` and `x` with `cols` elements.
    MatVec,
    Add,
    Sigmoid,
    Tanh,
    /// Element-wise (Hadamard) product.
    Mul,
    /// Flattens and joins any number of inputs into one vector.
    Concat,
    /// Softmax over the elements of a single vector, max-subtracted.
    Softmax,
    /// Element-wise max over `n` equally shaped vectors (max-over-time pooling).
    MaxPool,
    /// `1 - x`.
    OneMinus,
    /// `sum_i w_i x_i` over equally shaped inputs.
    WeightedSum(Vec<f64>),
    /// One row of a `[rows, dim]` parameter table.
    Embed { table: ParamId, row: usize },
    /// Softmax across `k` equally shaped vectors, independently per element
    /// position. Output shape `[k, len]`.
    SoftmaxAcross,
    /// Selects row `i` of a `[k, len]` matrix.
    Row(usize),
    /// `-(1 - p_c)^gamma * ln(max(p_c, PROB_FLOOR))` for a probability vector.
    Focal { class: usize, gamma: f64 },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatVec => "matvec",
            Primitive::Add => "add",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Tanh => "tanh",
            Primitive::Mul => "mul",
            Primitive::Concat => "concat",
            Primitive::Softmax => "softmax",
            Primitive::MaxPool => "max_pool",
            Primitive::OneMinus => "one_minus",
            Primitive::WeightedSum(_) => "weighted_sum",
            Primitive::Embed { .. } => "embed",
            Primitive::SoftmaxAcross => "softmax_across",
            Primitive::Row(_) => "row",
            Primitive::Focal { .. } => "focal",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{primitive}: {reason} (input shapes {shapes:?})")]
    Shape { primitive: &'static str, shapes: Vec<Vec<usize>>, reason: String },
    #[error("backward requires a scalar output, got shape {0:?}")]
    NonScalar(Vec<usize>),
}

enum Value<T> {
    Owned(Vec<T>),
    Param(ParamId),
}

enum Op {
    Input,
    Param(ParamId),
    Apply { prim: Primitive, inputs: Vec<NodeId>, argmax: Vec<usize> },
}

struct Node<T> {
    shape: Vec<usize>,
    value: Value<T>,
    op: Op,
}

pub struct Tape<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<NodeId>>,
    corrupt_mul: bool,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for k in chunks * 8..a.len() {
        tail = tail + a[k] * b[k];
    }
    let s = (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]);
    s + tail
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

fn focal_value<T: Scalar>(p: T, gamma: f64) -> T {
    let floor = T::of(PROB_FLOOR);
    let clamped = if p < floor { floor } else { p };
    let factor = if gamma == 0.0 { T::one() } else { (T::one() - p).max(T::zero()).powf(T::of(gamma)) };
    -(factor * clamped.ln())
}

fn focal_derivative<T: Scalar>(p: T, gamma: f64) -> T {
    let floor = T::of(PROB_FLOOR);
    let clamped = p < floor;
    let log_p = if clamped { floor.ln() } else { p.ln() };
    let one_minus = (T::one() - p).max(T::zero());
    let factor = if gamma == 0.0 { T::one() } else { one_minus.powf(T::of(gamma)) };
    // d/dp of -(1-p)^g ln p = g (1-p)^(g-1) ln p - (1-p)^g / p
    let factor_term = if gamma == 0.0 || one_minus == T::zero() {
        T::zero()
    } else {
        T::of(gamma) * one_minus.powf(T::of(gamma - 1.0)) * log_p
    };
    let log_term = if clamped { T::zero() } else { factor / p };
    factor_term - log_term
}

fn adjoint_slot<'a, T: Scalar>(nodes: &[Node<T>], adj: &'a mut [Option<Vec<T>>], n: NodeId) -> &'a mut Vec<T> {
    let len = numel(&nodes[n.0].shape);
    adj[n.0].get_or_insert_with(|| vec![T::zero(); len])
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self { params, nodes: Vec::new(), param_nodes: vec![None; params.len()], corrupt_mul: false }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Deliberately breaks the backward rule of [`Primitive::Mul`]. Only used
    /// to demonstrate that gradient checking catches a wrong derivative.
    #[doc(hidden)]
    pub fn corrupt_mul_backward(&mut self) {
        self.corrupt_mul = true;
    }

    /// A constant leaf; it never receives a gradient.
    pub fn input(&mut self, shape: Vec<usize>, values: Vec<T>) -> NodeId {
        assert_eq!(numel(&shape), values.len(), "input shape {shape:?} vs {} values", values.len());
        self.push(shape, Value::Owned(values), Op::Input)
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.input(vec![len], vec![T::zero(); len])
    }

    /// Leaf bound to a parameter block; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        let shape = self.params.shape(id).to_vec();
        let n = self.push(shape, Value::Param(id), Op::Param(id));
        self.param_nodes[id.0] = Some(n);
        n
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        match &self.nodes[id.0].value {
            Value::Owned(v) => v,
            Value::Param(p) => self.params.values(*p),
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn scalar(&self, id: NodeId) -> T {
        self.value(id)[0]
    }

    fn push(&mut self, shape: Vec<usize>, value: Value<T>, op: Op) -> NodeId {
        self.nodes.push(Node { shape, value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn shape_error(&self, prim: &Primitive, inputs: &[NodeId], reason: impl Into<String>) -> AutodiffError {
        AutodiffError::Shape {
            primitive: prim.name(),
            shapes: inputs.iter().map(|&i| self.shape(i).to_vec()).collect(),
            reason: reason.into(),
        }
    }

    fn check_arity(&self, prim: &Primitive, inputs: &[NodeId], n: usize) -> Result<(), AutodiffError> {
        if inputs.len() != n {
            return Err(self.shape_error(prim, inputs, format!("expected {n} inputs, got {}", inputs.len())));
        }
        Ok(())
    }

    fn check_same_numel(&self, prim: &Primitive, inputs: &[NodeId]) -> Result<usize, AutodiffError> {
        if inputs.is_empty() {
            return Err(self.shape_error(prim, inputs, "expected at least one input"));
        }
        let n = numel(self.shape(inputs[0]));
        if inputs.iter().any(|&i| numel(self.shape(i)) != n) {
            return Err(self.shape_error(prim, inputs, "inputs must have equal sizes"));
        }
        Ok(n)
    }

    /// Applies one primitive and records it for backward.
    pub fn apply(&mut self, prim: Primitive, inputs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let mut argmax = Vec::new();
        let (shape, out): (Vec<usize>, Vec<T>) = match &prim {
            Primitive::MatVec => {
                self.check_arity(&prim, inputs, 2)?;
                let ws = self.shape(inputs[0]);
                if ws.len() != 2 || ws[1] != numel(self.shape(inputs[1])) {
                    return Err(self.shape_error(&prim, inputs, "need W [rows, cols] and x with cols elements"));
                }
                let (rows, cols) = (ws[0], ws[1]);
                let w = self.value(inputs[0]);
                let x = self.value(inputs[1]);
                let out = (0..rows).map(|i| dot(&w[i * cols..(i + 1) * cols], x)).collect();
                (vec![rows], out)
            }
            Primitive::Add | Primitive::Mul => {
                self.check_arity(&prim, inputs, 2)?;
                if self.shape(inputs[0]) != self.shape(inputs[1]) {
                    return Err(self.shape_error(&prim, inputs, "operands must have identical shapes"));
                }
                let (a, b) = (self.value(inputs[0]), self.value(inputs[1]));
                let out = if prim == Primitive::Add {
                    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
                } else {
                    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
                };
                (self.shape(inputs[0]).to_vec(), out)
            }
            Primitive::Sigmoid | Primitive::Tanh | Primitive::OneMinus => {
                self.check_arity(&prim, inputs, 1)?;
                let x = self.value(inputs[0]);
                let out = match prim {
                    Primitive::Sigmoid => x.iter().map(|&v| sigmoid(v)).collect(),
                    Primitive::Tanh => x.iter().map(|&v| v.tanh()).collect(),
                    _ => x.iter().map(|&v| T::one() - v).collect(),
                };
                (self.shape(inputs[0]).to_vec(), out)
            }
            Primitive::Concat => {
                if inputs.is_empty() {
                    return Err(self.shape_error(&prim, inputs, "expected at least one input"));
                }
                let mut out = Vec::new();
                for &i in inputs {
                    out.extend_from_slice(self.value(i));
                }
                (vec![out.len()], out)
            }
            Primitive::Softmax => {
                self.check_arity(&prim, inputs, 1)?;
                let mut out = self.value(inputs[0]).to_vec();
                softmax_in_place(&mut out);
                (vec![out.len()], out)
            }
            Primitive::MaxPool => {
                let n = self.check_same_numel(&prim, inputs)?;
                let mut out = self.value(inputs[0]).to_vec();
                argmax = vec![0; n];
                for (t, &i) in inputs.iter().enumerate().skip(1) {
                    for (j, &v) in self.value(i).iter().enumerate() {
                        if v > out[j] {
                            out[j] = v;
                            argmax[j] = t;
                        }
                    }
                }
                (vec![n], out)
            }
            Primitive::WeightedSum(weights) => {
                let n = self.check_same_numel(&prim, inputs)?;
                if weights.len() != inputs.len() {
                    return Err(self.shape_error(&prim, inputs, format!("{} weights for {} inputs", weights.len(), inputs.len())));
                }
                let mut out = vec![T::zero(); n];
                for (&i, &w) in inputs.iter().zip(weights) {
                    axpy(T::of(w), self.value(i), &mut out);
                }
                (self.shape(inputs[0]).to_vec(), out)
            }
            Primitive::Embed { table, row } => {
                self.check_arity(&prim, inputs, 0)?;
                let shape = self.params.shape(*table);
                if shape.len() != 2 || *row >= shape[0] {
                    return Err(AutodiffError::Shape {
                        primitive: prim.name(),
                        shapes: vec![shape.to_vec()],
                        reason: format!("row {row} outside a [rows, dim] table"),
                    });
                }
                let dim = shape[1];
                let v = &self.params.values(*table)[row * dim..(row + 1) * dim];
                (vec![dim], v.to_vec())
            }
            Primitive::SoftmaxAcross => {
                let n = self.check_same_numel(&prim, inputs)?;
                let k = inputs.len();
                let mut out = vec![T::zero(); k * n];
                let mut column = vec![T::zero(); k];
                for j in 0..n {
                    for (r, &i) in inputs.iter().enumerate() {
                        column[r] = self.value(i)[j];
                    }
                    softmax_in_place(&mut column);
                    for r in 0..k {
                        out[r * n + j] = column[r];
                    }
                }
                (vec![k, n], out)
            }
            Primitive::Row(r) => {
                self.check_arity(&prim, inputs, 1)?;
                let s = self.shape(inputs[0]);
                if s.len() != 2 || *r >= s[0] {
                    return Err(self.shape_error(&prim, inputs, format!("row {r} outside a [k, len] matrix")));
                }
                let len = s[1];
                (vec![len], self.value(inputs[0])[r * len..(r + 1) * len].to_vec())
            }
            Primitive::Focal { class, gamma } => {
                self.check_arity(&prim, inputs, 1)?;
                let p = self.value(inputs[0]);
                if *class >= p.len() {
                    return Err(self.shape_error(&prim, inputs, format!("class {class} out of range")));
                }
                if !(*gamma >= 0.0 && gamma.is_finite()) {
                    return Err(self.shape_error(&prim, inputs, format!("gamma {gamma} must be finite and >= 0")));
                }
                (vec![1], vec![focal_value(p[*class], *gamma)])
            }
        };
        Ok(self.push(shape, Value::Owned(out), Op::Apply { prim, inputs: inputs.to_vec(), argmax }))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::MatVec, &[w, x])
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Add, &[a, b])
    }
    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Sigmoid, &[x])
    }
    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Tanh, &[x])
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Mul, &[a, b])
    }
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Concat, parts)
    }
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Softmax, &[x])
    }
    pub fn max_pool(&mut self, steps: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::MaxPool, steps)
    }
    pub fn one_minus(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::OneMinus, &[x])
    }
    pub fn weighted_sum(&mut self, xs: &[NodeId], weights: &[f64]) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::WeightedSum(weights.to_vec()), xs)
    }
    pub fn embed(&mut self, table: ParamId, row: usize) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Embed { table, row }, &[])
    }
    pub fn softmax_across(&mut self, xs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::SoftmaxAcross, xs)
    }
    pub fn row(&mut self, m: NodeId, r: usize) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Row(r), &[m])
    }
    pub fn focal(&mut self, probs: NodeId, class: usize, gamma: f64) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Focal { class, gamma }, &[probs])
    }

    /// Gradients of a scalar node with respect to every parameter block.
    pub fn backward(&self, output: NodeId) -> Result<Gradients<T>, AutodiffError> {
        self.backward_seeded(output, T::one())
    }

    /// Like [`Tape::backward`] with the output adjoint set to `seed`.
    pub fn backward_seeded(&self, output: NodeId, seed: T) -> Result<Gradients<T>, AutodiffError> {
        let shape = self.shape(output);
        if numel(shape) != 1 {
            return Err(AutodiffError::NonScalar(shape.to_vec()));
        }
        let mut grads = Gradients::zeros_like(self.params);
        let mut adj: Vec<Option<Vec<T>>> = Vec::with_capacity(output.0 + 1);
        adj.resize_with(output.0 + 1, || None);
        adj[output.0] = Some(vec![seed]);

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    axpy(T::one(), &g, grads.dense_mut(*p));
                }
                Op::Apply { prim, inputs, argmax } => {
                    self.backprop(prim, inputs, argmax, idx, &g, &mut adj, &mut grads);
                }
            }
        }
        Ok(grads)
    }

    #[allow(clippy::too_many_arguments)]
    fn backprop(
        &self,
        prim: &Primitive,
        inputs: &[NodeId],
        argmax: &[usize],
        idx: usize,
        g: &[T],
        adj: &mut [Option<Vec<T>>],
        grads: &mut Gradients<T>,
    ) {
        let out = match &self.nodes[idx].value {
            Value::Owned(v) => v.as_slice(),
            Value::Param(_) => unreachable!(),
        };
        let nodes = &self.nodes;
        match prim {
            Primitive::MatVec => {
                let cols = self.shape(inputs[0])[1];
                let x = self.value(inputs[1]);
                {
                    let dx = adjoint_slot(nodes, adj, inputs[1]);
                    let w = self.value(inputs[0]);
                    for (i, &gi) in g.iter().enumerate() {
                        axpy(gi, &w[i * cols..(i + 1) * cols], dx);
                    }
                }
                let dw = adjoint_slot(nodes, adj, inputs[0]);
                for (i, &gi) in g.iter().enumerate() {
                    axpy(gi, x, &mut dw[i * cols..(i + 1) * cols]);
                }
            }
            Primitive::Add => {
                for &i in inputs {
                    axpy(T::one(), g, adjoint_slot(nodes, adj, i));
                }
            }
            Primitive::Sigmoid => {
                let d = adjoint_slot(nodes, adj, inputs[0]);
                for ((di, &gi), &y) in d.iter_mut().zip(g).zip(out) {
                    *di = *di + gi * y * (T::one() - y);
                }
            }
            Primitive::Tanh => {
                let d = adjoint_slot(nodes, adj, inputs[0]);
                for ((di, &gi), &y) in d.iter_mut().zip(g).zip(out) {
                    *di = *di + gi * (T::one() - y * y);
                }
            }
            Primitive::OneMinus => {
                axpy(-T::one(), g, adjoint_slot(nodes, adj, inputs[0]));
            }
            Primitive::Mul => {
                let (a, b) = (self.value(inputs[0]), self.value(inputs[1]));
                let da_src = if self.corrupt_mul { a } else { b };
                {
                    let da = adjoint_slot(nodes, adj, inputs[0]);
                    for ((d, &gi), &v) in da.iter_mut().zip(g).zip(da_src) {
                        *d = *d + gi * v;
                    }
                }
                let db = adjoint_slot(nodes, adj, inputs[1]);
                for ((d, &gi), &v) in db.iter_mut().zip(g).zip(a) {
                    *d = *d + gi * v;
                }
            }
            Primitive::Concat => {
                let mut offset = 0;
                for &i in inputs {
                    let len = numel(self.shape(i));
                    axpy(T::one(), &g[offset..offset + len], adjoint_slot(nodes, adj, i));
                    offset += len;
                }
            }
            Primitive::Softmax => {
                let inner: T = g.iter().zip(out).fold(T::zero(), |acc, (&gi, &y)| acc + gi * y);
                let d = adjoint_slot(nodes, adj, inputs[0]);
                for ((di, &gi), &y) in d.iter_mut().zip(g).zip(out) {
                    *di = *di + y * (gi - inner);
                }
            }
            Primitive::MaxPool => {
                for (j, &t) in argmax.iter().enumerate() {
                    let d = adjoint_slot(nodes, adj, inputs[t]);
                    d[j] = d[j] + g[j];
                }
            }
            Primitive::WeightedSum(weights) => {
                for (&i, &w) in inputs.iter().zip(weights) {
                    axpy(T::of(w), g, adjoint_slot(nodes, adj, i));
                }
            }
            Primitive::Embed { table, row } => {
                let dim = self.params.shape(*table)[1];
                grads.add_to_row(*table, *row, dim, g);
            }
            Primitive::SoftmaxAcross => {
                let k = inputs.len();
                let n = out.len() / k;
                for j in 0..n {
                    let inner = (0..k).fold(T::zero(), |acc, r| acc + g[r * n + j] * out[r * n + j]);
                    for (r, &i) in inputs.iter().enumerate() {
                        let y = out[r * n + j];
                        let d = adjoint_slot(nodes, adj, i);
                        d[j] = d[j] + y * (g[r * n + j] - inner);
                    }
                }
            }
            Primitive::Row(r) => {
                let len = out.len();
                let d = adjoint_slot(nodes, adj, inputs[0]);
                axpy(T::one(), g, &mut d[r * len..(r + 1) * len]);
            }
            Primitive::Focal { class, gamma } => {
                let p = self.value(inputs[0])[*class];
                let d = adjoint_slot(nodes, adj, inputs[0]);
                d[*class] = d[*class] + g[0] * focal_derivative(p, *gamma);
            }
        }
    }
}
