//! The reversed product order on `R_+^N`.
//!
//! `x ⪯ y` iff `x_i >= y_i` for every coordinate, so smaller coordinates sit
//! higher and the origin is the top element. Throughout the crate the more
//! specific item (hyponym, image, premise) is passed first:
//! `penalty(lower, upper)`, `score(kind, lower, upper)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::numerics::{dot, norm, DenseVector};

/// Order-violation penalty `‖max(0, upper - lower)‖²`.
///
/// Zero exactly when `lower ⪯ upper`.
pub fn penalty(lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_dims("penalty", lower.len(), upper.len())?;
    Ok(penalty_unchecked(lower, upper))
}

#[inline]
pub(crate) fn penalty_unchecked(lower: &[f64], upper: &[f64]) -> f64 {
    lower
        .iter()
        .zip(upper)
        .map(|(x, y)| {
            let d = y - x;
            if d > 0.0 {
                d * d
            } else {
                0.0
            }
        })
        .sum()
}

/// Gradients of [`penalty`] with respect to `(lower, upper)`.
///
/// `grad_upper = 2 max(0, upper - lower)` and `grad_lower = -grad_upper`;
/// coordinates with `upper_i <= lower_i` get exactly zero.
pub fn penalty_grads(lower: &[f64], upper: &[f64]) -> Result<(DenseVector, DenseVector)> {
    check_dims("penalty_grads", lower.len(), upper.len())?;
    let grad_upper: Vec<f64> = lower
        .iter()
        .zip(upper)
        .map(|(x, y)| if y > x { 2.0 * (y - x) } else { 0.0 })
        .collect();
    let grad_lower = grad_upper.iter().map(|g| -g).collect::<Vec<_>>();
    Ok((grad_lower.into(), grad_upper.into()))
}

/// `lower ⪯ upper` with slack: every `upper_i <= lower_i + tol`.
pub fn is_below(lower: &[f64], upper: &[f64], tol: f64) -> Result<bool> {
    check_dims("is_below", lower.len(), upper.len())?;
    if !(tol >= 0.0) {
        return Err(Error::contract(format!("tolerance must be >= 0, got {tol}")));
    }
    Ok(lower.iter().zip(upper).all(|(x, y)| *y <= x + tol))
}

/// Least upper bound (abstraction): elementwise minimum.
pub fn join(x: &[f64], y: &[f64]) -> Result<DenseVector> {
    check_dims("join", x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(a, b)| a.min(*b)).collect::<Vec<_>>().into())
}

/// Greatest lower bound (composition): elementwise maximum.
pub fn meet(x: &[f64], y: &[f64]) -> Result<DenseVector> {
    check_dims("meet", x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(a, b)| a.max(*b)).collect::<Vec<_>>().into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// `-penalty(lower, upper)`; asymmetric.
    Order,
    /// Cosine similarity; the symmetric ablation.
    Cosine,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Order => "order",
            ScorerKind::Cosine => "cosine",
        }
    }
}

impl std::fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "order" => Ok(ScorerKind::Order),
            "cosine" => Ok(ScorerKind::Cosine),
            other => Err(Error::contract(format!(
                "unknown scorer '{other}' (expected order|cosine)"
            ))),
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::contract("cosine score of an all-zero vector"));
    }
    Ok((dot(a, b) / (na * nb), na, nb))
}

/// Compatibility of an ordered candidate pair; higher is better.
pub fn score(kind: ScorerKind, lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_dims("score", lower.len(), upper.len())?;
    match kind {
        ScorerKind::Order => Ok(-penalty_unchecked(lower, upper)),
        ScorerKind::Cosine => cosine(lower, upper).map(|(c, _, _)| c),
    }
}

/// [`score`] plus its gradients with respect to `(lower, upper)`.
pub fn score_grads(
    kind: ScorerKind,
    lower: &[f64],
    upper: &[f64],
) -> Result<(f64, DenseVector, DenseVector)> {
    check_dims("score_grads", lower.len(), upper.len())?;
    match kind {
        ScorerKind::Order => {
            let (gl, gu) = penalty_grads(lower, upper)?;
            let neg = |v: DenseVector| -> DenseVector { v.iter().map(|g| -g).collect::<Vec<_>>().into() };
            Ok((-penalty_unchecked(lower, upper), neg(gl), neg(gu)))
        }
        ScorerKind::Cosine => {
            let (c, na, nb) = cosine(lower, upper)?;
            let inv = 1.0 / (na * nb);
            let ga: Vec<f64> = lower
                .iter()
                .zip(upper)
                .map(|(a, b)| b * inv - c * a / (na * na))
                .collect();
            let gb: Vec<f64> = lower
                .iter()
                .zip(upper)
                .map(|(a, b)| a * inv - c * b / (nb * nb))
                .collect();
            Ok((c, ga.into(), gb.into()))
        }
    }
}

/// Nonnegative dissimilarity used by the margin losses and thresholding:
/// the penalty itself for `Order`, `1 - cos` for `Cosine`.
pub fn energy(kind: ScorerKind, lower: &[f64], upper: &[f64]) -> Result<f64> {
    let s = score(kind, lower, upper)?;
    Ok(match kind {
        ScorerKind::Order => -s,
        ScorerKind::Cosine => 1.0 - s,
    })
}

/// [`energy`] with gradients.
pub fn energy_grads(
    kind: ScorerKind,
    lower: &[f64],
    upper: &[f64],
) -> Result<(f64, DenseVector, DenseVector)> {
    let (s, mut gl, mut gu) = score_grads(kind, lower, upper)?;
    gl.iter_mut().for_each(|g| *g = -*g);
    gu.iter_mut().for_each(|g| *g = -*g);
    let e = match kind {
        ScorerKind::Order => -s,
        ScorerKind::Cosine => 1.0 - s,
    };
    Ok((e, gl, gu))
}

/// `out[q][c] = score(kind, lower(q, c), upper(q, c))` where each row is a
/// query. `query_is_upper` picks which side the query occupies.
pub fn score_matrix(
    kind: ScorerKind,
    queries: &[DenseVector],
    candidates: &[DenseVector],
    query_is_upper: bool,
    parallel: bool,
) -> Result<Vec<Vec<f64>>> {
    let row = |q: &DenseVector| -> Result<Vec<f64>> {
        candidates
            .iter()
            .map(|c| {
                if query_is_upper {
                    score(kind, c, q)
                } else {
                    score(kind, q, c)
                }
            })
            .collect()
    };
    if parallel {
        queries.par_iter().map(row).collect()
    } else {
        queries.iter().map(row).collect()
    }
}
