//! Order-embeddings into the reversed product order on the nonnegative orthant.
//!
//! A point `x` sits below `y` when every coordinate of `x` is at least the
//! corresponding coordinate of `y`; the origin is the top element. Learned
//! maps into this space are trained so that ordered pairs (hyponym/hypernym,
//! image/caption, premise/hypothesis) incur zero order-violation penalty and
//! unordered pairs incur at least a margin.
//!
//! The crate is organised bottom-up:
//!
//! | module       | contents                                                  |
//! |--------------|-----------------------------------------------------------|
//! | [`numerics`] | dense vectors/matrices, seeded RNG, Adam, gradient checks |
//! | [`order`]    | penalty, order predicate, meet/join, scorers              |
//! | [`taxonomy`] | hypernym DAGs, closure, splits, corruption, baseline      |
//! | [`encoders`] | lookup tables, image projection, GRU sentence encoder     |
//! | [`training`] | the three max-margin losses, epoch loop, checkpoints      |
//! | [`eval`]     | threshold tuning, Recall@K / ranks, fold averaging        |
//! | [`io`]       | file formats for edges, features, captions, pairs         |
//! | [`synthetic`]| desk-scale surrogate corpora                              |
//! | [`tasks`]    | task models wiring encoders, losses and evaluation        |

pub mod encoders;
pub mod error;
pub mod eval;
pub mod io;
pub mod numerics;
pub mod order;
pub mod synthetic;
pub mod tasks;
pub mod taxonomy;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{AdamConfig, AdamState, DenseMatrix, DenseVector, Rng};
pub use order::{is_below, join, meet, penalty, penalty_grads, score, ScorerKind};
pub use taxonomy::{EdgeSplit, LabeledPair, PairSet, Taxonomy};
