//! Task models: the hypernym lookup table, the caption/image retrieval pair
//! of encoders, and the entailment sentence encoder, each with its training
//! objective, evaluation and checkpoint round trip.
//!
//! RNG streams derived from the config seed: stream 0 initialises
//! parameters, stream 1 drives training (see [`run_epochs`]), stream 2
//! draws evaluation negatives.
//!
//! [`run_epochs`]: crate::training::run_epochs

mod algebra;
mod entailment;
mod hypernym;
mod retrieval;

pub use algebra::{combine, nearest_by_penalty, Combine, Neighbors};
pub use entailment::{evaluate_entailment, train_entailment, EntailmentModel, EntailmentObjective};
pub use hypernym::{evaluate_hypernym, train_hypernym, HypernymData, HypernymModel, HypernymObjective};
pub use retrieval::{
    evaluate_retrieval, retrieval_dev_metric, retrieval_metrics_for, train_retrieval, RetrievalModel,
    RetrievalObjective,
};

use crate::numerics::TensorView;

pub(crate) const EVAL_STREAM: u64 = 2;

pub(crate) fn prefix_views<'a>(prefix: &str, views: Vec<TensorView<'a>>) -> Vec<TensorView<'a>> {
    views
        .into_iter()
        .map(|t| TensorView {
            name: format!("{prefix}.{}", t.name),
            ..t
        })
        .collect()
}

pub(crate) fn prefix_muts<'a>(prefix: &str, views: Vec<(String, &'a mut [f64])>) -> Vec<(String, &'a mut [f64])> {
    views
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t))
        .collect()
}

/// Shape of a named checkpoint tensor, or a version error.
pub(crate) fn tensor_shape(ckpt: &crate::training::Checkpoint, name: &str) -> crate::Result<Vec<usize>> {
    ckpt.tensor(name)
        .map(|t| t.shape.clone())
        .ok_or_else(|| crate::Error::Version(format!("checkpoint lacks tensor '{name}'")))
}

pub(crate) fn shape2(ckpt: &crate::training::Checkpoint, name: &str) -> crate::Result<(usize, usize)> {
    match tensor_shape(ckpt, name)?.as_slice() {
        &[r, c] => Ok((r, c)),
        other => Err(crate::Error::Version(format!("tensor '{name}' has shape {other:?}, expected 2-d"))),
    }
}

