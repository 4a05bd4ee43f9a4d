//! Max-margin objectives, the epoch loop with early stopping, and the
//! checkpoint snapshot type.

mod checkpoint;
mod config;
mod epochs;
mod losses;

pub use checkpoint::{Checkpoint, NamedTensor};
pub use config::{TaskKind, TrainConfig};
pub use epochs::{run_epochs, EpochLog, Objective, TrainOutcome};
pub use losses::{
    entailment_loss, hypernym_loss, margin_loss, ranking_loss, retrieval_score, MarginLoss,
    RankingLoss,
};
