use crate::error::{check_dims, Error, Result};
use crate::numerics::{axpy, DenseVector};
use crate::order::{energy_grads, score, score_grads, ScorerKind};

/// Loss value plus gradients for every `(lower, upper)` pair, aligned with
/// the input lists.
#[derive(Clone, Debug)]
pub struct MarginLoss {
    pub loss: f64,
    pub pos_grads: Vec<(DenseVector, DenseVector)>,
    pub neg_grads: Vec<(DenseVector, DenseVector)>,
}

/// `Σ_pos E(u, v) + Σ_neg max(0, margin - E(u', v'))`, where `E` is the
/// order-violation penalty for [`ScorerKind::Order`] and `1 - cos` for the
/// cosine ablation.
pub fn margin_loss<V: AsRef<[f64]>>(
    kind: ScorerKind,
    pos: &[(V, V)],
    neg: &[(V, V)],
    margin: f64,
) -> Result<MarginLoss> {
    if pos.is_empty() && neg.is_empty() {
        return Err(Error::contract("margin loss over an empty batch"));
    }
    if !(margin > 0.0) {
        return Err(Error::contract(format!("margin must be positive, got {margin}")));
    }
    let mut loss = 0.0;
    let mut pos_grads = Vec::with_capacity(pos.len());
    for (lower, upper) in pos {
        let (e, gl, gu) = energy_grads(kind, lower.as_ref(), upper.as_ref())?;
        loss += e;
        pos_grads.push((gl, gu));
    }
    let mut neg_grads = Vec::with_capacity(neg.len());
    for (lower, upper) in neg {
        let (e, gl, gu) = energy_grads(kind, lower.as_ref(), upper.as_ref())?;
        let hinge = margin - e;
        if hinge > 0.0 {
            loss += hinge;
            let flip = |v: DenseVector| -> DenseVector { v.iter().map(|g| -g).collect::<Vec<_>>().into() };
            neg_grads.push((flip(gl), flip(gu)));
        } else {
            neg_grads.push((DenseVector::zeros(gl.dim()), DenseVector::zeros(gu.dim())));
        }
    }
    Ok(MarginLoss {
        loss,
        pos_grads,
        neg_grads,
    })
}

/// Hypernym objective; pairs are `(hyponym, hypernym)` embeddings.
pub fn hypernym_loss<V: AsRef<[f64]>>(pos: &[(V, V)], neg: &[(V, V)], margin: f64) -> Result<MarginLoss> {
    margin_loss(ScorerKind::Order, pos, neg, margin)
}

/// Entailment objective; pairs are `(premise, hypothesis)` embeddings.
pub fn entailment_loss<V: AsRef<[f64]>>(
    pos: &[(V, V)],
    neg: &[(V, V)],
    margin: f64,
) -> Result<MarginLoss> {
    margin_loss(ScorerKind::Order, pos, neg, margin)
}

/// Caption-image compatibility `S(c, i)`. Captions sit above images, so the
/// image is the lower argument; `reversed` swaps the two.
pub fn retrieval_score(kind: ScorerKind, reversed: bool, caption: &[f64], image: &[f64]) -> Result<f64> {
    if reversed {
        score(kind, caption, image)
    } else {
        score(kind, image, caption)
    }
}

fn retrieval_score_grads(
    kind: ScorerKind,
    reversed: bool,
    caption: &[f64],
    image: &[f64],
) -> Result<(DenseVector, DenseVector)> {
    if reversed {
        let (_, gc, gi) = score_grads(kind, caption, image)?;
        Ok((gc, gi))
    } else {
        let (_, gi, gc) = score_grads(kind, image, caption)?;
        Ok((gc, gi))
    }
}

#[derive(Clone, Debug)]
pub struct RankingLoss {
    pub loss: f64,
    pub caption_grads: Vec<DenseVector>,
    pub image_grads: Vec<DenseVector>,
}

/// Pairwise ranking loss with in-batch contrastives. Caption `k` and image
/// `k` form the ground-truth pair; every other caption and image in the
/// batch is a contrastive term:
///
/// `Σ_k Σ_{j≠k} max(0, α - S(c_k, i_k) + S(c_j, i_k)) + max(0, α - S(c_k, i_k) + S(c_k, i_j))`
pub fn ranking_loss(
    captions: &[DenseVector],
    images: &[DenseVector],
    margin: f64,
    kind: ScorerKind,
    reversed: bool,
) -> Result<RankingLoss> {
    let n = captions.len();
    check_dims("ranking_loss batch", images.len(), n)?;
    if n == 0 {
        return Err(Error::contract("ranking loss over an empty batch"));
    }
    if !(margin > 0.0) {
        return Err(Error::contract(format!("margin must be positive, got {margin}")));
    }
    let dim = captions[0].dim();
    for v in captions.iter().chain(images) {
        check_dims("ranking_loss embedding", v.dim(), dim)?;
    }

    // s[c][i] = S(caption c, image i)
    let mut s = vec![vec![0.0; n]; n];
    for (c, row) in s.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().enumerate() {
            *cell = retrieval_score(kind, reversed, &captions[c], &images[i])?;
        }
    }
    let mut weight = vec![vec![0.0; n]; n];
    let mut loss = 0.0;
    for k in 0..n {
        let gt = s[k][k];
        for j in (0..n).filter(|&j| j != k) {
            let t = margin - gt + s[j][k];
            if t > 0.0 {
                loss += t;
                weight[k][k] -= 1.0;
                weight[j][k] += 1.0;
            }
            let t = margin - gt + s[k][j];
            if t > 0.0 {
                loss += t;
                weight[k][k] -= 1.0;
                weight[k][j] += 1.0;
            }
        }
    }

    let mut caption_grads = vec![DenseVector::zeros(dim); n];
    let mut image_grads = vec![DenseVector::zeros(dim); n];
    for c in 0..n {
        for i in 0..n {
            let w = weight[c][i];
            if w == 0.0 {
                continue;
            }
            let (gc, gi) = retrieval_score_grads(kind, reversed, &captions[c], &images[i])?;
            axpy(w, &gc, &mut caption_grads[c]);
            axpy(w, &gi, &mut image_grads[i]);
        }
    }
    Ok(RankingLoss {
        loss,
        caption_grads,
        image_grads,
    })
}
