use crate::error::{Error, Result};
use crate::numerics::DenseVector;
use crate::order::{join, meet, penalty};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    /// Elementwise min: the least upper bound (abstraction).
    Join,
    /// Elementwise max: the greatest lower bound (composition).
    Meet,
}

pub fn combine(op: Combine, items: &[DenseVector]) -> Result<DenseVector> {
    let (first, rest) = items
        .split_first()
        .ok_or_else(|| Error::contract("nothing to combine"))?;
    rest.iter().try_fold(first.clone(), |acc, v| match op {
        Combine::Join => join(&acc, v),
        Combine::Meet => meet(&acc, v),
    })
}

/// Candidate indices with their penalties, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbors {
    /// Smallest `penalty(query, c)`: candidates the query sits below.
    pub above: Vec<(usize, f64)>,
    /// Smallest `penalty(c, query)`: candidates sitting below the query.
    pub below: Vec<(usize, f64)>,
}

/// The `top_k` candidates closest to being above and below `query`; ties
/// go to the lower index.
pub fn nearest_by_penalty(query: &[f64], candidates: &[DenseVector], top_k: usize) -> Result<Neighbors> {
    let rank = |up: bool| -> Result<Vec<(usize, f64)>> {
        let mut scored = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let p = if up { penalty(query, c)? } else { penalty(c, query)? };
                Ok((i, p))
            })
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        scored.truncate(top_k);
        Ok(scored)
    };
    Ok(Neighbors {
        above: rank(true)?,
        below: rank(false)?,
    })
}
