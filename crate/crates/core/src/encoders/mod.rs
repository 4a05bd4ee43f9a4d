//! Maps from discrete objects into `R_+^N`.
//!
//! Every encoder ends in the same head: elementwise absolute value, then
//! optional L2 normalisation, both differentiated through in the backward
//! pass. The absolute value can be switched off for the symmetric (cosine)
//! retrieval ablation, which lets coordinates go negative.

mod gru;
mod projection;
mod table;
mod vocab;

pub use gru::{GruEncoder, GruTrace};
pub use projection::{LinearProjection, ProjectionTrace};
pub use table::EmbeddingTable;
pub use vocab::{tokenize, Vocabulary, UNK_TOKEN};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, DenseMatrix, DenseVector, Rng};

/// Norms below this cannot be normalised.
pub const MIN_NORM: f64 = 1e-12;

/// `sign(0) := 0`.
#[inline]
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Output head state kept for the backward pass.
#[derive(Clone, Debug)]
pub struct HeadTrace {
    pre: Vec<f64>,
    out: DenseVector,
    norm: Option<f64>,
}

impl HeadTrace {
    pub fn output(&self) -> &DenseVector {
        &self.out
    }
}

pub(crate) fn head_forward(pre: Vec<f64>, absolute: bool, normalize: bool) -> Result<HeadTrace> {
    let mut out: Vec<f64> = if absolute {
        pre.iter().map(|v| v.abs()).collect()
    } else {
        pre.clone()
    };
    let mut n = None;
    if normalize {
        let len = norm(&out);
        if len < MIN_NORM {
            return Err(Error::numeric(format!(
                "cannot normalise a vector of norm {len:e}"
            )));
        }
        out.iter_mut().for_each(|v| *v /= len);
        n = Some(len);
    }
    Ok(HeadTrace {
        pre,
        out: out.into(),
        norm: n,
    })
}

/// Gradient with respect to the head's input.
pub(crate) fn head_backward(trace: &HeadTrace, grad_out: &[f64], absolute: bool) -> Vec<f64> {
    let mut g: Vec<f64> = match trace.norm {
        Some(len) => {
            let proj = dot(&trace.out, grad_out);
            grad_out
                .iter()
                .zip(trace.out.iter())
                .map(|(gi, yi)| (gi - yi * proj) / len)
                .collect()
        }
        None => grad_out.to_vec(),
    };
    if absolute {
        g.iter_mut().zip(&trace.pre).for_each(|(gi, p)| *gi *= sign(*p));
    }
    g
}

/// `Uniform(-0.1, 0.1)` entries, used for embedding tables.
pub fn init_table(rows: usize, cols: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    DenseMatrix::new(rows, cols, rng.uniform_vec(-0.1, 0.1, rows * cols)?)
}

/// Glorot-uniform: `Uniform(±sqrt(6 / (fan_in + fan_out)))`.
pub fn init_glorot(rows: usize, cols: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::new(rows, cols, rng.uniform_vec(-a, a, rows * cols)?)
}

/// Prefixes tensor names of a nested component.
pub(crate) fn prefixed(prefix: &str, name: &str) -> String {
    format!("{prefix}.{name}")
}
