use std::collections::BTreeMap;

use super::Scalar;

/// Handle to one named parameter block inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
}

impl<T> ParamBlock<T> {
    pub fn numel(&self) -> usize {
        self.values.len()
    }
}

/// Ordered collection of trainable blocks. Registration order is stable and
/// doubles as the serialization order of checkpoints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    blocks: Vec<ParamBlock<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { blocks: Vec::new() }
    }

    /// Registers a block. Panics if `values.len()` disagrees with `shape`,
    /// which is always a construction bug.
    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<T>) -> ParamId {
        let name = name.into();
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            values.len(),
            "block {name}: shape {shape:?} does not match {} values",
            values.len()
        );
        assert!(shape.iter().all(|&d| d > 0), "block {name}: zero dimension in {shape:?}");
        self.blocks.push(ParamBlock { name, shape, values });
        ParamId(self.blocks.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, id: ParamId) -> &ParamBlock<T> {
        &self.blocks[id.0]
    }

    pub fn values(&self, id: ParamId) -> &[T] {
        &self.blocks[id.0].values
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.blocks[id.0].values
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.blocks[id.0].shape
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.blocks.iter().position(|b| b.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.blocks.len()).map(ParamId)
    }

    pub fn blocks(&self) -> &[ParamBlock<T>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock<T>] {
        &mut self.blocks
    }

    pub fn num_values(&self) -> usize {
        self.blocks.iter().map(|b| b.numel()).sum()
    }

    /// Converts every block to another precision.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            blocks: self
                .blocks
                .iter()
                .map(|b| ParamBlock {
                    name: b.name.clone(),
                    shape: b.shape.clone(),
                    values: b.values.iter().map(|&v| U::of(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.values.iter().all(|v| v.is_finite()))
    }
}

/// Gradient for a single block. Embedding lookups touch only a few rows, so
/// they accumulate sparsely until another primitive forces a dense buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockGrad<T> {
    Zero,
    Rows { row_len: usize, rows: BTreeMap<usize, Vec<T>> },
    Dense(Vec<T>),
}

/// Gradients of one scalar output with respect to every block of a store.
/// Blocks the output does not depend on stay [`BlockGrad::Zero`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    blocks: Vec<BlockGrad<T>>,
    numels: Vec<usize>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Self {
            blocks: vec![BlockGrad::Zero; store.len()],
            numels: store.blocks().iter().map(|b| b.numel()).collect(),
        }
    }

    pub fn block(&self, id: ParamId) -> &BlockGrad<T> {
        &self.blocks[id.0]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub(crate) fn dense_mut(&mut self, id: ParamId) -> &mut [T] {
        let numel = self.numels[id.0];
        let slot = &mut self.blocks[id.0];
        if !matches!(slot, BlockGrad::Dense(_)) {
            let mut dense = vec![T::zero(); numel];
            if let BlockGrad::Rows { row_len, rows } = slot {
                for (&r, vals) in rows.iter() {
                    let base = r * *row_len;
                    for (d, &v) in dense[base..base + *row_len].iter_mut().zip(vals) {
                        *d = *d + v;
                    }
                }
            }
            *slot = BlockGrad::Dense(dense);
        }
        match slot {
            BlockGrad::Dense(v) => v,
            _ => unreachable!(),
        }
    }

    pub(crate) fn add_to_row(&mut self, id: ParamId, row: usize, row_len: usize, grad: &[T]) {
        let slot = &mut self.blocks[id.0];
        if let BlockGrad::Zero = slot {
            *slot = BlockGrad::Rows { row_len, rows: BTreeMap::new() };
        }
        match slot {
            BlockGrad::Rows { rows, .. } => {
                let entry = rows.entry(row).or_insert_with(|| vec![T::zero(); row_len]);
                for (e, &g) in entry.iter_mut().zip(grad) {
                    *e = *e + g;
                }
            }
            BlockGrad::Dense(dense) => {
                let base = row * row_len;
                for (e, &g) in dense[base..base + row_len].iter_mut().zip(grad) {
                    *e = *e + g;
                }
            }
            BlockGrad::Zero => unreachable!(),
        }
    }

    /// Materializes one block as a dense vector.
    pub fn dense(&self, id: ParamId) -> Vec<T> {
        let numel = self.numels[id.0];
        let mut out = vec![T::zero(); numel];
        self.add_block_scaled(id, T::one(), &mut out);
        out
    }

    fn add_block_scaled(&self, id: ParamId, scale: T, dst: &mut [T]) {
        match &self.blocks[id.0] {
            BlockGrad::Zero => {}
            BlockGrad::Dense(v) => {
                for (d, &g) in dst.iter_mut().zip(v) {
                    *d = *d + scale * g;
                }
            }
            BlockGrad::Rows { row_len, rows } => {
                for (&r, vals) in rows {
                    let base = r * row_len;
                    for (d, &g) in dst[base..base + row_len].iter_mut().zip(vals) {
                        *d = *d + scale * g;
                    }
                }
            }
        }
    }

    /// `dst[b] += scale * self[b]` for every block.
    pub fn accumulate_into(&self, dst: &mut [Vec<T>], scale: T) {
        assert_eq!(dst.len(), self.blocks.len());
        for (i, d) in dst.iter_mut().enumerate() {
            self.add_block_scaled(ParamId(i), scale, d);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().all(|b| match b {
            BlockGrad::Zero => true,
            BlockGrad::Dense(v) => v.iter().all(|x| x.is_finite()),
            BlockGrad::Rows { rows, .. } => rows.values().flatten().all(|x| x.is_finite()),
        })
    }
}

/// Dense zero buffers shaped like every block of `store`.
pub fn zero_buffers<T: Scalar>(store: &ParamStore<T>) -> Vec<Vec<T>> {
    store.blocks().iter().map(|b| vec![T::zero(); b.numel()]).collect()
}
