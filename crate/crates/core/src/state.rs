//! Stacked per-agent proposals `w = col(w_1, …, w_N)`, each block in `R^N`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("expected {expected} blocks of length {expected}, got block {block} of length {got}")]
    BlockLength {
        expected: usize,
        block: usize,
        got: usize,
    },
    #[error("expected {expected} blocks, got {got}")]
    BlockCount { expected: usize, got: usize },
    #[error("state must have at least one agent")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedState {
    n: usize,
    data: Vec<f64>,
    k: usize,
}

impl StackedState {
    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Result<Self, StateError> {
        let n = blocks.len();
        if n == 0 {
            return Err(StateError::Empty);
        }
        if let Some((block, b)) = blocks.iter().enumerate().find(|(_, b)| b.len() != n) {
            return Err(StateError::BlockLength {
                expected: n,
                block,
                got: b.len(),
            });
        }
        Ok(StackedState {
            n,
            data: blocks.concat(),
            k: 0,
        })
    }

    /// Every agent proposes the same vector `x`.
    pub fn consensus(x: &[f64]) -> Self {
        let n = x.len();
        StackedState {
            n,
            data: x.repeat(n),
            k: 0,
        }
    }

    /// Agent `i` allocates the whole grand-coalition value to itself.
    pub fn self_allocation(n: usize, grand_value: f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = grand_value;
        }
        StackedState { n, data, k: 0 }
    }

    pub fn zeros(n: usize) -> Self {
        StackedState {
            n,
            data: vec![0.0; n * n],
            k: 0,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn with_iteration(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub(crate) fn set_iteration(&mut self, k: usize) {
        self.k = k;
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn to_blocks(&self) -> Vec<Vec<f64>> {
        self.blocks().map(<[f64]>::to_vec).collect()
    }

    /// Flat `N²` vector.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn block_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n];
        for b in self.blocks() {
            for (m, v) in mean.iter_mut().zip(b) {
                *m += v;
            }
        }
        let inv = 1.0 / self.n as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        mean
    }

    /// Euclidean distance in `R^{N²}`.
    pub fn distance(&self, other: &StackedState) -> f64 {
        crate::polytope::dist(&self.data, &other.data)
    }
}
