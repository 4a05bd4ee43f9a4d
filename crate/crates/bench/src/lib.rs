//! Fixtures shared by the criterion benches.

use ordembed::numerics::{DenseVector, Rng};

/// `n` random nonnegative vectors of dimension `dim`.
pub fn random_points(n: usize, dim: usize, seed: u64) -> Vec<DenseVector> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|_| DenseVector::from(rng.uniform_vec(0.0, 1.0, dim).expect("valid range")))
        .collect()
}

/// `rows x cols` uniform scores.
pub fn random_scores(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed);
    (0..rows)
        .map(|_| rng.uniform_vec(0.0, 1.0, cols).expect("valid range"))
        .collect()
}
