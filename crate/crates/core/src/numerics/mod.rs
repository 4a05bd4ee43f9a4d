//! Dense linear algebra, seeded randomness, the Adam optimizer and a
//! central-difference gradient checker.
//!
//! Everything is `f64`. Values stay finite through every public operation
//! given finite inputs.

mod adam;
mod dense;
mod gradcheck;
mod rng;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use dense::{axpy, dot, norm, DenseMatrix, DenseVector, Parameters, TensorView};
pub use gradcheck::{finite_diff_check, finite_diff_check_skipping, near_kink, KINK_TOL};
pub use rng::Rng;
