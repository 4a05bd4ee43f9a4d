use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector, Parameters, Rng, TensorView};

use super::{init_table, sign};

/// Per-id learnable rows; the effective embedding of id `k` is `|weights[k]|`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub weights: DenseMatrix,
}

impl EmbeddingTable {
    pub fn new(weights: DenseMatrix) -> Self {
        Self { weights }
    }

    pub fn init(vocab: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self::new(init_table(vocab, dim, rng)?))
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id >= self.vocab_size() {
            return Err(Error::contract(format!(
                "id {id} out of range for a table of {} rows",
                self.vocab_size()
            )));
        }
        Ok(())
    }

    pub fn lookup(&self, id: usize) -> Result<DenseVector> {
        self.check_id(id)?;
        Ok(self
            .weights
            .row(id)
            .iter()
            .map(|v| v.abs())
            .collect::<Vec<_>>()
            .into())
    }

    /// Routes `grad_out` (w.r.t. the looked-up vector) into row `id` of
    /// `grads`, through the absolute value.
    pub fn backward(&self, id: usize, grad_out: &[f64], grads: &mut EmbeddingTable) -> Result<()> {
        self.check_id(id)?;
        let w = self.weights.row(id);
        for ((g, &go), &wi) in grads.weights.row_mut(id).iter_mut().zip(grad_out).zip(w) {
            *g += go * sign(wi);
        }
        Ok(())
    }
}

impl Parameters for EmbeddingTable {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![TensorView {
            name: "weights".into(),
            shape: self.weights.shape().to_vec(),
            data: self.weights.as_slice(),
        }]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![("weights".into(), self.weights.as_mut_slice())]
    }
}
